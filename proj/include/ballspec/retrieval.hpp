#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ballspec/errors.hpp"
#include "ballspec/learn.hpp"

namespace ballspec {

// Fixed-dimension shape signature plus the identity of the shape it came
// from.  The id drives self-exclusion during evaluation; an empty id never
// matches anything.
struct Descriptor {
    std::vector<double> values;
    std::string id;
};

// Deterministic linear replacement for a learned reducer: PCA fitted on the
// gallery's concatenated features when they exceed the target dimension,
// identity with zero padding otherwise.
class DescriptorReducer {
public:
    explicit DescriptorReducer(int out_dim = 1000) : out_dim_(out_dim) {
        if (out_dim < 1) throw input_error("descriptor dimension must be positive");
    }

    int output_dim() const { return out_dim_; }
    bool fitted() const { return fitted_; }
    bool identity() const { return identity_; }
    std::size_t input_dim() const { return in_dim_; }
    const std::vector<double>& mean() const { return mean_; }
    const std::vector<double>& components() const { return components_; }

    void fit(const std::vector<std::vector<double>>& gallery) {
        if (gallery.empty()) throw input_error("reducer fitting needs at least one vector");
        in_dim_ = gallery.front().size();
        if (in_dim_ == 0) throw input_error("reducer fitting needs nonempty vectors");
        for (const auto& v : gallery)
            if (v.size() != in_dim_)
                throw input_error("gallery vectors must share one dimension");

        if (in_dim_ <= static_cast<std::size_t>(out_dim_)) {
            identity_ = true;
            mean_.clear();
            components_.clear();
            fitted_ = true;
            return;
        }

        identity_ = false;
        std::size_t n = gallery.size();
        mean_.assign(in_dim_, 0.0);
        for (const auto& v : gallery)
            for (std::size_t i = 0; i < in_dim_; ++i) mean_[i] += v[i];
        for (double& m : mean_) m /= static_cast<double>(n);

        Eigen::MatrixXd x(n, in_dim_);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t i = 0; i < in_dim_; ++i)
                x(r, i) = gallery[r][i] - mean_[i];

        // Components via the sample Gram matrix: an eigenvector u of X X^T
        // with eigenvalue lambda lifts to the unit component X^T u / sqrt(lambda).
        Eigen::MatrixXd gram = x * x.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
        if (es.info() != Eigen::Success)
            throw numerical_error("eigendecomposition failed during reducer fitting");

        components_.assign(static_cast<std::size_t>(out_dim_) * in_dim_, 0.0);
        double lambda_max = es.eigenvalues()(static_cast<Eigen::Index>(n) - 1);
        double tol = 1e-12 * std::max(lambda_max, 1.0);
        int row = 0;
        for (Eigen::Index j = static_cast<Eigen::Index>(n) - 1;
             j >= 0 && row < out_dim_; --j) {
            double lambda = es.eigenvalues()(j);
            if (!(lambda > tol)) break;
            Eigen::VectorXd comp = (x.transpose() * es.eigenvectors().col(j)) / std::sqrt(lambda);
            for (std::size_t i = 0; i < in_dim_; ++i)
                components_[static_cast<std::size_t>(row) * in_dim_ + i] = comp(i);
            ++row;
        }
        fitted_ = true;
    }

    std::vector<double> apply(const std::vector<double>& raw) const {
        if (!fitted_) throw state_error("descriptor reducer used before fitting");
        if (raw.size() != in_dim_)
            throw input_error("descriptor input dimension does not match the fitted reducer");
        std::vector<double> out(out_dim_, 0.0);
        if (identity_) {
            std::copy(raw.begin(), raw.end(), out.begin());
            return out;
        }
        for (int o = 0; o < out_dim_; ++o) {
            const double* comp = components_.data() + static_cast<std::size_t>(o) * in_dim_;
            double sum = 0.0;
            for (std::size_t i = 0; i < in_dim_; ++i) sum += comp[i] * (raw[i] - mean_[i]);
            out[o] = sum;
        }
        return out;
    }

    // Rehydrates a reducer saved to disk.
    void restore(std::size_t in_dim, bool identity, std::vector<double> mean,
                 std::vector<double> components) {
        if (identity) {
            if (!mean.empty() || !components.empty())
                throw input_error("identity reducer carries no coefficients");
        } else {
            if (mean.size() != in_dim ||
                components.size() != static_cast<std::size_t>(out_dim_) * in_dim)
                throw input_error("reducer coefficient sizes do not match");
        }
        in_dim_ = in_dim;
        identity_ = identity;
        mean_ = std::move(mean);
        components_ = std::move(components);
        fitted_ = true;
    }

private:
    int out_dim_;
    bool fitted_ = false;
    bool identity_ = false;
    std::size_t in_dim_ = 0;
    std::vector<double> mean_;
    std::vector<double> components_;  // [out][in]
};

// Concatenated post-norm post-relu second layer fields, the raw material the
// reducer compresses.
inline std::vector<double> concat_features(const NetworkParams& p, const BallGrid& grid,
                                           const BasisSet& basis) {
    return forward_full(p, grid, basis).features.values;
}

// Batch variant sharing one lattice context; grids may differ in shape, input
// tables are rebuilt only on a shape change.
inline std::vector<std::vector<double>> concat_features_batch(const NetworkParams& p,
                                                              const std::vector<BallGrid>& grids,
                                                              const BasisSet& basis) {
    if (grids.empty()) throw input_error("feature extraction needs at least one grid");
    LearnContext ctx = make_learn_context(basis, p.lattice_shape());
    detail::check_network(p, ctx);
    ProjectionState ps = make_projection_state(p.projection, ctx);
    detail::StepTables st = detail::make_step_tables(p, ctx);
    detail::Workspace w = detail::make_workspace(p, ctx);
    std::vector<std::vector<double>> out;
    out.reserve(grids.size());
    SpectralTables tables = make_tables(basis, grids.front());
    for (const BallGrid& g : grids) {
        if (!(g.n_r == tables.n_r && g.n_theta == tables.n_theta && g.n_phi == tables.n_phi))
            tables = make_tables(basis, g);
        PreparedSample s = prepare_sample(g, basis, tables);
        detail::forward_trace(p, ps, st, s.prim, ctx, w);
        std::vector<double> feat(w.g2.size());
        for (std::size_t f = 0; f < feat.size(); ++f) feat[f] = std::max(w.g2[f], 0.0);
        out.push_back(std::move(feat));
    }
    return out;
}

inline Descriptor descriptor(const NetworkParams& p, const BallGrid& grid, const BasisSet& basis,
                             const DescriptorReducer& reducer, std::string id = {}) {
    Descriptor d;
    d.values = reducer.apply(concat_features(p, grid, basis));
    d.id = std::move(id);
    return d;
}

enum class Similarity { Cosine, Euclidean, KL, Bhattacharyya };

inline const char* similarity_name(Similarity s) {
    switch (s) {
        case Similarity::Cosine: return "cosine";
        case Similarity::Euclidean: return "euclidean";
        case Similarity::KL: return "kl";
        default: return "bhattacharyya";
    }
}

inline Similarity parse_similarity(const std::string& s) {
    if (s == "cosine") return Similarity::Cosine;
    if (s == "euclidean") return Similarity::Euclidean;
    if (s == "kl") return Similarity::KL;
    if (s == "bhattacharyya") return Similarity::Bhattacharyya;
    throw input_error("unknown similarity metric '" + s + "'");
}

inline std::vector<Similarity> all_similarities() {
    return {Similarity::Cosine, Similarity::Euclidean, Similarity::KL,
            Similarity::Bhattacharyya};
}

namespace detail {

inline std::vector<double> softmax_vec(const std::vector<double>& v) {
    double mx = *std::max_element(v.begin(), v.end());
    std::vector<double> out(v.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        denom += out[i];
    }
    for (double& x : out) x /= denom;
    return out;
}

}  // namespace detail

// All metrics are oriented so that a larger score means more similar.
// kl and bhattacharyya softmax-normalize both arguments internally.
inline double similarity(const std::vector<double>& a, const std::vector<double>& b,
                         Similarity kind) {
    if (a.empty() || a.size() != b.size())
        throw input_error("similarity needs two descriptors of one nonzero dimension");
    switch (kind) {
        case Similarity::Cosine: {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                dot += a[i] * b[i];
                na += a[i] * a[i];
                nb += b[i] * b[i];
            }
            if (na == 0.0 || nb == 0.0)
                throw undefined_similarity_error(
                    "cosine similarity is undefined for a zero-norm descriptor");
            return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
        }
        case Similarity::Euclidean: {
            double s = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                double d = a[i] - b[i];
                s += d * d;
            }
            return -std::sqrt(s);
        }
        case Similarity::KL: {
            std::vector<double> p = detail::softmax_vec(a), q = detail::softmax_vec(b);
            double kl = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) kl += p[i] * std::log(p[i] / q[i]);
            return -kl;
        }
        default: {
            std::vector<double> p = detail::softmax_vec(a), q = detail::softmax_vec(b);
            double bc = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) bc += std::sqrt(p[i] * q[i]);
            return std::log(std::min(bc, 1.0));
        }
    }
}

inline double similarity(const Descriptor& a, const Descriptor& b, Similarity kind) {
    return similarity(a.values, b.values, kind);
}

struct RankedMatch {
    std::size_t index = 0;
    double score = 0.0;
};

// Full descending ranking of the gallery; equal scores keep ascending gallery
// index.  No self-exclusion here.
inline std::vector<RankedMatch> rank(const Descriptor& query,
                                     const std::vector<Descriptor>& gallery, Similarity kind) {
    if (gallery.empty()) throw input_error("cannot rank against an empty gallery");
    std::vector<RankedMatch> out(gallery.size());
    for (std::size_t i = 0; i < gallery.size(); ++i)
        out[i] = {i, similarity(query, gallery[i], kind)};
    std::stable_sort(out.begin(), out.end(),
                     [](const RankedMatch& x, const RankedMatch& y) { return x.score > y.score; });
    return out;
}

struct RetrievalMetrics {
    double nn_accuracy = 0.0;
    double mean_average_precision = 0.0;
};

// Queries against a labeled gallery.  A gallery entry sharing a query's
// nonempty id is that query's own record and is skipped.  Queries left with
// no same-label gallery entries do not enter the mAP mean; if no query has
// any, the ranking is vacuously perfect and mAP is 1.
inline RetrievalMetrics evaluate(const std::vector<Descriptor>& queries,
                                 const std::vector<int>& query_labels,
                                 const std::vector<Descriptor>& gallery,
                                 const std::vector<int>& gallery_labels, Similarity kind) {
    if (queries.empty() || gallery.empty())
        throw input_error("evaluation needs nonempty queries and gallery");
    if (queries.size() != query_labels.size() || gallery.size() != gallery_labels.size())
        throw input_error("label counts must match the descriptor counts");

    std::size_t nn_hits = 0, nn_total = 0;
    double ap_sum = 0.0;
    std::size_t ap_count = 0;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const Descriptor& q = queries[qi];
        std::vector<RankedMatch> ranked = rank(q, gallery, kind);
        std::size_t seen = 0, hits = 0, relevant = 0;
        double ap = 0.0;
        bool first = true, nn_hit = false;
        for (const RankedMatch& m : ranked) {
            if (!q.id.empty() && gallery[m.index].id == q.id) continue;
            ++seen;
            if (first) {
                nn_hit = (gallery_labels[m.index] == query_labels[qi]);
                first = false;
            }
            if (gallery_labels[m.index] == query_labels[qi]) {
                ++hits;
                ap += static_cast<double>(hits) / static_cast<double>(seen);
                ++relevant;
            }
        }
        if (seen == 0) continue;
        ++nn_total;
        if (nn_hit) ++nn_hits;
        if (relevant > 0) {
            ap_sum += ap / static_cast<double>(relevant);
            ++ap_count;
        }
    }
    if (nn_total == 0) throw input_error("every query was excluded from the gallery");
    RetrievalMetrics out;
    out.nn_accuracy = static_cast<double>(nn_hits) / static_cast<double>(nn_total);
    out.mean_average_precision = (ap_count > 0) ? ap_sum / static_cast<double>(ap_count) : 1.0;
    return out;
}

// Leave-one-out protocol: every gallery entry queries the rest, excluded from
// its own candidates by position.
inline RetrievalMetrics evaluate(const std::vector<Descriptor>& gallery,
                                 const std::vector<int>& labels, Similarity kind) {
    if (gallery.size() < 2)
        throw input_error("leave-one-out evaluation needs at least two entries");
    if (gallery.size() != labels.size())
        throw input_error("label count must match the gallery");
    std::size_t nn_hits = 0;
    double ap_sum = 0.0;
    std::size_t ap_count = 0;
    for (std::size_t qi = 0; qi < gallery.size(); ++qi) {
        std::vector<RankedMatch> ranked = rank(gallery[qi], gallery, kind);
        std::size_t seen = 0, hits = 0, relevant = 0;
        double ap = 0.0;
        bool first = true;
        for (const RankedMatch& m : ranked) {
            if (m.index == qi) continue;
            ++seen;
            if (first) {
                if (labels[m.index] == labels[qi]) ++nn_hits;
                first = false;
            }
            if (labels[m.index] == labels[qi]) {
                ++hits;
                ap += static_cast<double>(hits) / static_cast<double>(seen);
                ++relevant;
            }
        }
        if (relevant > 0) {
            ap_sum += ap / static_cast<double>(relevant);
            ++ap_count;
        }
    }
    RetrievalMetrics out;
    out.nn_accuracy = static_cast<double>(nn_hits) / static_cast<double>(gallery.size());
    out.mean_average_precision = (ap_count > 0) ? ap_sum / static_cast<double>(ap_count) : 1.0;
    return out;
}

}  // namespace ballspec
