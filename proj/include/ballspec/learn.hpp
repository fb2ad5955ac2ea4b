#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ballspec/basis.hpp"
#include "ballspec/convolution.hpp"
#include "ballspec/errors.hpp"
#include "ballspec/grid.hpp"
#include "ballspec/pointcloud.hpp"
#include "ballspec/transform.hpp"

namespace ballspec {

inline constexpr int kLayer1Kernels = 4;
inline constexpr int kLayer2Kernels = 16;

enum class ConvKind { Blended, RotationOnly };

inline const char* conv_kind_name(ConvKind k) {
    return k == ConvKind::Blended ? "blended" : "rotation-only";
}

inline ConvKind parse_conv_kind(const std::string& s) {
    if (s == "blended") return ConvKind::Blended;
    if (s == "rotation-only") return ConvKind::RotationOnly;
    throw input_error("unknown convolution kind '" + s + "'");
}

// Trainable zonal kernel: one real synthesis coefficient per radial element
// (n, l), triangle packed.  The (0, 0) slot pairs with the vanishing radial
// element, so it stays zero and never receives gradient.
struct KernelSpectrum {
    int n_max = 0;
    std::vector<double> values;

    KernelSpectrum() = default;
    explicit KernelSpectrum(int n_max_) : n_max(n_max_) {
        if (n_max < 0 || n_max > kMaxBandLimit)
            throw std::domain_error("kernel band limit out of range");
        values.assign(BasisSet::triangle_index(n_max + 1, 0), 0.0);
    }

    double get(int n, int l) const {
        check(n, l);
        return values[BasisSet::triangle_index(n, l)];
    }
    double& at(int n, int l) {
        check(n, l);
        return values[BasisSet::triangle_index(n, l)];
    }

    Moments to_moments() const {
        Moments m(n_max);
        for (int n = 1; n <= n_max; ++n)
            for (int l = 0; l <= n; ++l) m.at(n, l, 0) = get(n, l);
        return m;
    }

private:
    void check(int n, int l) const {
        if (n < 0 || n > n_max || l < 0 || l > n)
            throw std::domain_error("kernel index out of range");
    }
};

// Stack of per-kernel correlation fields over the query lattice.
struct FeatureMap {
    int kernels = 0, n_r = 0, n_theta = 0, n_phi = 0;
    std::vector<double> values;

    FeatureMap() = default;
    FeatureMap(int kernels_, int n_r_, int n_theta_, int n_phi_)
        : kernels(kernels_), n_r(n_r_), n_theta(n_theta_), n_phi(n_phi_) {
        if (kernels < 1 || n_r < 1 || n_theta < 1 || n_phi < 1)
            throw std::domain_error("feature map dimensions must be positive");
        values.assign(static_cast<std::size_t>(kernels) * cell_count(), 0.0);
    }

    std::size_t cell_count() const {
        return static_cast<std::size_t>(n_r) * n_theta * n_phi;
    }

    std::size_t index(int c, int i, int j, int k) const {
        return ((static_cast<std::size_t>(c) * n_r + i) * n_theta + j) * n_phi + k;
    }

    double& at(int c, int i, int j, int k) { return values[index(c, i, j, k)]; }
    double at(int c, int i, int j, int k) const { return values[index(c, i, j, k)]; }

    double* channel(int c) { return values.data() + static_cast<std::size_t>(c) * cell_count(); }
    const double* channel(int c) const {
        return values.data() + static_cast<std::size_t>(c) * cell_count();
    }
};

namespace detail {

// Per group: subtract the mean and divide by sqrt(var + eps), then apply the
// per-channel affine.  xh and the per-group stddev are kept for the backward
// pass.
inline void gn_forward(const double* x, int channels, int groups, std::size_t cells,
                       const std::vector<double>& scale, const std::vector<double>& shift,
                       double eps, double* xh, double* s_out, double* y) {
    int cpg = channels / groups;
    for (int g = 0; g < groups; ++g) {
        std::size_t n = static_cast<std::size_t>(cpg) * cells;
        double mean = 0.0;
        for (int c = g * cpg; c < (g + 1) * cpg; ++c)
            for (std::size_t p = 0; p < cells; ++p) mean += x[c * cells + p];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (int c = g * cpg; c < (g + 1) * cpg; ++c)
            for (std::size_t p = 0; p < cells; ++p) {
                double d = x[c * cells + p] - mean;
                var += d * d;
            }
        var /= static_cast<double>(n);
        double s = std::sqrt(var + eps);
        s_out[g] = s;
        for (int c = g * cpg; c < (g + 1) * cpg; ++c)
            for (std::size_t p = 0; p < cells; ++p) {
                double h = (x[c * cells + p] - mean) / s;
                xh[c * cells + p] = h;
                y[c * cells + p] = scale[c] * h + shift[c];
            }
    }
}

inline void gn_backward(const double* xh, const double* s, int channels, int groups,
                        std::size_t cells, const std::vector<double>& scale, const double* gy,
                        double* gx, std::vector<double>& gscale, std::vector<double>& gshift) {
    int cpg = channels / groups;
    for (int c = 0; c < channels; ++c) {
        double gsc = 0.0, gsh = 0.0;
        for (std::size_t p = 0; p < cells; ++p) {
            gsc += gy[c * cells + p] * xh[c * cells + p];
            gsh += gy[c * cells + p];
        }
        gscale[c] += gsc;
        gshift[c] += gsh;
    }
    for (int g = 0; g < groups; ++g) {
        std::size_t n = static_cast<std::size_t>(cpg) * cells;
        double m1 = 0.0, m2 = 0.0;
        for (int c = g * cpg; c < (g + 1) * cpg; ++c)
            for (std::size_t p = 0; p < cells; ++p) {
                double gh = gy[c * cells + p] * scale[c];
                m1 += gh;
                m2 += gh * xh[c * cells + p];
            }
        m1 /= static_cast<double>(n);
        m2 /= static_cast<double>(n);
        for (int c = g * cpg; c < (g + 1) * cpg; ++c)
            for (std::size_t p = 0; p < cells; ++p) {
                double gh = gy[c * cells + p] * scale[c];
                gx[c * cells + p] = (gh - m1 - xh[c * cells + p] * m2) / s[g];
            }
    }
}

}  // namespace detail

inline FeatureMap group_norm(const FeatureMap& x, int groups, const std::vector<double>& scale,
                             const std::vector<double>& shift, double eps = 1e-8) {
    if (groups < 1 || x.kernels % groups != 0)
        throw input_error("group count must divide the kernel count");
    if (static_cast<int>(scale.size()) != x.kernels ||
        static_cast<int>(shift.size()) != x.kernels)
        throw input_error("affine parameter count must match the kernel count");
    if (!(eps > 0.0)) throw std::domain_error("group norm eps must be positive");
    FeatureMap out(x.kernels, x.n_r, x.n_theta, x.n_phi);
    std::vector<double> xh(x.values.size());
    std::vector<double> s(groups);
    detail::gn_forward(x.values.data(), x.kernels, groups, x.cell_count(), scale, shift, eps,
                       xh.data(), s.data(), out.values.data());
    return out;
}

inline FeatureMap group_norm(const FeatureMap& x, int groups, double eps = 1e-8) {
    return group_norm(x, groups, std::vector<double>(x.kernels, 1.0),
                      std::vector<double>(x.kernels, 0.0), eps);
}

// Full trainable state of the two-layer network.  The projection table is
// shared by both layers; the fully connected head maps the flattened second
// layer features straight to class logits.
struct NetworkParams {
    int n_max = 0;
    int lat_r = 0, lat_theta = 0, lat_phi = 0;
    int classes = 0;
    int groups1 = 4, groups2 = 8;
    double gn_eps = 1e-8;
    ConvKind conv = ConvKind::Blended;

    MixingCoefficients projection{0};
    std::vector<KernelSpectrum> layer1, layer2;
    std::vector<double> gn1_scale, gn1_shift, gn2_scale, gn2_shift;
    std::vector<double> fc_weight;  // [class][kernel * cell]
    std::vector<double> fc_bias;

    std::size_t lattice_cells() const {
        return static_cast<std::size_t>(lat_r) * lat_theta * lat_phi;
    }
    std::size_t feature_count() const { return kLayer2Kernels * lattice_cells(); }
    BallGrid lattice_shape() const { return BallGrid(lat_r, lat_theta, lat_phi); }
};

inline NetworkParams init_params(const BasisSet& basis, const BallGrid& lattice, int classes,
                                 unsigned long long seed, ConvKind conv = ConvKind::Blended) {
    if (classes < 2) throw input_error("network needs at least two classes");
    NetworkParams p;
    p.n_max = basis.n_max;
    p.lat_r = lattice.n_r;
    p.lat_theta = lattice.n_theta;
    p.lat_phi = lattice.n_phi;
    p.classes = classes;
    p.conv = conv;
    p.projection = basis.mixing;

    std::mt19937_64 rng(seed);
    int terms = static_cast<int>(BasisSet::triangle_index(basis.n_max + 1, 0)) - 1;
    std::normal_distribution<double> kdist(0.0, 1.0 / std::sqrt(std::max(terms, 1)));
    auto make_kernels = [&](int count) {
        std::vector<KernelSpectrum> ks;
        for (int c = 0; c < count; ++c) {
            KernelSpectrum k(basis.n_max);
            for (int n = 1; n <= basis.n_max; ++n)
                for (int l = 0; l <= n; ++l) k.at(n, l) = kdist(rng);
            ks.push_back(std::move(k));
        }
        return ks;
    };
    p.layer1 = make_kernels(kLayer1Kernels);
    p.layer2 = make_kernels(kLayer2Kernels);
    p.gn1_scale.assign(kLayer1Kernels, 1.0);
    p.gn1_shift.assign(kLayer1Kernels, 0.0);
    p.gn2_scale.assign(kLayer2Kernels, 1.0);
    p.gn2_shift.assign(kLayer2Kernels, 0.0);

    std::normal_distribution<double> fdist(0.0, 1.0 / std::sqrt(static_cast<double>(
                                                        p.feature_count())));
    p.fc_weight.resize(static_cast<std::size_t>(classes) * p.feature_count());
    for (double& w : p.fc_weight) w = fdist(rng);
    p.fc_bias.assign(classes, 0.0);
    return p;
}

// Parameter shaped gradient container.
struct ParamGradients {
    MixingCoefficients projection{0};
    std::vector<KernelSpectrum> layer1, layer2;
    std::vector<double> gn1_scale, gn1_shift, gn2_scale, gn2_shift;
    std::vector<double> fc_weight, fc_bias;
};

inline ParamGradients zero_gradients(const NetworkParams& p) {
    ParamGradients g;
    g.projection = MixingCoefficients(p.n_max);
    g.layer1.assign(p.layer1.size(), KernelSpectrum(p.n_max));
    g.layer2.assign(p.layer2.size(), KernelSpectrum(p.n_max));
    g.gn1_scale.assign(p.gn1_scale.size(), 0.0);
    g.gn1_shift.assign(p.gn1_shift.size(), 0.0);
    g.gn2_scale.assign(p.gn2_scale.size(), 0.0);
    g.gn2_shift.assign(p.gn2_shift.size(), 0.0);
    g.fc_weight.assign(p.fc_weight.size(), 0.0);
    g.fc_bias.assign(p.fc_bias.size(), 0.0);
    return g;
}

struct GradMask {
    bool projection = true;
    bool kernels = true;
    bool affines = true;
    bool fc = true;
};

// Pairwise inner products of the primitive radial profiles under weight r^2;
// the squared norm of any mixed element q is q^T G q.
inline std::vector<double> primitive_gram(const BasisSet& basis) {
    int s = basis.n_max + 1;
    std::vector<double> g(static_cast<std::size_t>(s) * s);
    for (int d = 0; d < s; ++d)
        for (int d2 = 0; d2 < s; ++d2)
            g[static_cast<std::size_t>(d) * s + d2] =
                (basis.mode == Mode::Exponential)
                    ? exp_weighted_integral(static_cast<double>(d + d2))
                    : 1.0 / (d + d2 + 3);
    return g;
}

// Everything fixed across training steps: lattice tables, flattened angular
// weights, and the primitive Gram matrix.
struct LearnContext {
    const BasisSet* basis = nullptr;
    SpectralTables lattice;
    std::vector<double> wa;  // per angular cell, sin(phi) dtheta dphi
    std::vector<double> prim_gram;
};

inline LearnContext make_learn_context(const BasisSet& basis, const BallGrid& lattice_shape) {
    LearnContext c;
    c.basis = &basis;
    c.lattice = make_tables(basis, lattice_shape);
    c.wa.resize(static_cast<std::size_t>(c.lattice.n_theta) * c.lattice.n_phi);
    for (int j = 0; j < c.lattice.n_theta; ++j)
        for (int k = 0; k < c.lattice.n_phi; ++k)
            c.wa[static_cast<std::size_t>(j) * c.lattice.n_phi + k] = c.lattice.w_ang[k];
    c.prim_gram = primitive_gram(basis);
    return c;
}

// Radial side of the mixing table: primitive coefficient vectors of every
// mixed element and their squared norms.
struct ProjectionState {
    std::vector<std::vector<double>> q;
    std::vector<double> nu;
};

inline ProjectionState make_projection_state(const MixingCoefficients& w,
                                             const LearnContext& ctx) {
    ProjectionState s;
    s.q = mixed_radial_coeffs(w, *ctx.basis);
    int dim = ctx.basis->n_max + 1;
    s.nu.assign(s.q.size(), 0.0);
    for (std::size_t t = 0; t < s.q.size(); ++t) {
        double acc = 0.0;
        for (int d = 0; d < dim; ++d)
            for (int d2 = 0; d2 < dim; ++d2)
                acc += s.q[t][d] * ctx.prim_gram[static_cast<std::size_t>(d) * dim + d2] *
                       s.q[t][d2];
        s.nu[t] = acc;
    }
    return s;
}

namespace detail {

// Flattened (l, n) rows over the per-degree chains n = chain_start(l)..n_max.
struct ChainRows {
    int n_max = 0;
    std::vector<int> row_l, row_n;
    std::vector<int> offset;  // per degree l

    int rows() const { return static_cast<int>(row_l.size()); }
};

inline ChainRows chain_rows(int n_max) {
    ChainRows c;
    c.n_max = n_max;
    c.offset.resize(n_max + 1, 0);
    for (int l = 0; l <= n_max; ++l) {
        c.offset[l] = c.rows();
        for (int n = std::max(l, 1); n <= n_max; ++n) {
            c.row_l.push_back(l);
            c.row_n.push_back(n);
        }
    }
    return c;
}

// Shift resolved correlation weights: rows[row(l, n)][shell] multiplies the
// field coefficient a_{nlm}, with the angular constant folded in.  The
// rotation-only variant pairs diagonally through the squared norms and is
// constant across shells.
inline std::vector<double> kernel_rows(const KernelSpectrum& b, ConvKind kind,
                                       const LearnContext& ctx, const ChainRows& rows) {
    const BasisSet& basis = *ctx.basis;
    int n_r = ctx.lattice.n_r;
    std::vector<double> r(static_cast<std::size_t>(rows.rows()) * n_r, 0.0);
    for (int row = 0; row < rows.rows(); ++row) {
        int l = rows.row_l[row], n = rows.row_n[row];
        double cl = angular_constant(l);
        if (kind == ConvKind::RotationOnly) {
            double w = cl * basis.norm2(n, l) * b.get(n, l);
            for (int i = 0; i < n_r; ++i) r[static_cast<std::size_t>(row) * n_r + i] = w;
            continue;
        }
        for (int i = 0; i < n_r; ++i) {
            double acc = 0.0;
            for (int n2 = std::max(l, 1); n2 <= basis.n_max; ++n2) {
                if (n2 == n) continue;
                acc += basis.gram_coeff(n, n2, l) *
                       (ctx.lattice.prim[static_cast<std::size_t>(n - l) * n_r + i] -
                        ctx.lattice.prim[static_cast<std::size_t>(n2 - l) * n_r + i]) *
                       b.get(n2, l);
            }
            r[static_cast<std::size_t>(row) * n_r + i] = cl * acc;
        }
    }
    return r;
}

inline void kernel_rows_backward(const std::vector<double>& g_rows, ConvKind kind,
                                 const LearnContext& ctx, const ChainRows& rows,
                                 KernelSpectrum& g_b) {
    const BasisSet& basis = *ctx.basis;
    int n_r = ctx.lattice.n_r;
    for (int row = 0; row < rows.rows(); ++row) {
        int l = rows.row_l[row], n = rows.row_n[row];
        double cl = angular_constant(l);
        if (kind == ConvKind::RotationOnly) {
            double acc = 0.0;
            for (int i = 0; i < n_r; ++i) acc += g_rows[static_cast<std::size_t>(row) * n_r + i];
            g_b.at(n, l) += cl * basis.norm2(n, l) * acc;
            continue;
        }
        for (int n2 = std::max(l, 1); n2 <= basis.n_max; ++n2) {
            if (n2 == n) continue;
            double acc = 0.0;
            for (int i = 0; i < n_r; ++i)
                acc += g_rows[static_cast<std::size_t>(row) * n_r + i] *
                       (ctx.lattice.prim[static_cast<std::size_t>(n - l) * n_r + i] -
                        ctx.lattice.prim[static_cast<std::size_t>(n2 - l) * n_r + i]);
            g_b.at(n2, l) += cl * basis.gram_coeff(n, n2, l) * acc;
        }
    }
}

// field[i][ang] = Re sum_lm K[lm][i] Y[lm][ang], K[lm][i] = sum_n rows a_nlm.
inline void apply_kernel(const Moments& coeffs, const std::vector<double>& rows,
                         const ChainRows& chain, const LearnContext& ctx,
                         std::vector<std::complex<double>>& kbuf, double* field) {
    const SpectralTables& t = ctx.lattice;
    int n_r = t.n_r;
    std::size_t n_ang = static_cast<std::size_t>(t.n_theta) * t.n_phi;
    std::size_t n_lm = t.n_lm;
    kbuf.assign(n_lm * n_r, {0.0, 0.0});
    for (int row = 0; row < chain.rows(); ++row) {
        int l = chain.row_l[row], n = chain.row_n[row];
        for (int m = -l; m <= l; ++m) {
            std::complex<double> a = coeffs.at(n, l, m);
            if (a == std::complex<double>(0.0, 0.0)) continue;
            std::size_t lm = SpectralTables::lm_index(l, m);
            for (int i = 0; i < n_r; ++i)
                kbuf[lm * n_r + i] += rows[static_cast<std::size_t>(row) * n_r + i] * a;
        }
    }
    std::fill(field, field + static_cast<std::size_t>(n_r) * n_ang, 0.0);
    for (int i = 0; i < n_r; ++i) {
        double* out = field + static_cast<std::size_t>(i) * n_ang;
        for (std::size_t lm = 0; lm < n_lm; ++lm) {
            std::complex<double> k = kbuf[lm * n_r + i];
            if (k == std::complex<double>(0.0, 0.0)) continue;
            const std::complex<double>* yrow = &t.y[lm * n_ang];
            for (std::size_t p = 0; p < n_ang; ++p)
                out[p] += k.real() * yrow[p].real() - k.imag() * yrow[p].imag();
        }
    }
}

// Adjoint of apply_kernel.  Complex adjoints follow the convention
// g = dL/dRe + i dL/dIm.
inline void apply_kernel_backward(const Moments& coeffs, const std::vector<double>& rows,
                                  const ChainRows& chain, const LearnContext& ctx,
                                  const double* gfield, std::vector<std::complex<double>>& gk,
                                  Moments& gcoeffs, std::vector<double>& g_rows) {
    const SpectralTables& t = ctx.lattice;
    int n_r = t.n_r;
    std::size_t n_ang = static_cast<std::size_t>(t.n_theta) * t.n_phi;
    std::size_t n_lm = t.n_lm;
    gk.assign(n_lm * n_r, {0.0, 0.0});
    for (int i = 0; i < n_r; ++i) {
        const double* gf = gfield + static_cast<std::size_t>(i) * n_ang;
        for (std::size_t lm = 0; lm < n_lm; ++lm) {
            const std::complex<double>* yrow = &t.y[lm * n_ang];
            double re = 0.0, im = 0.0;
            for (std::size_t p = 0; p < n_ang; ++p) {
                re += gf[p] * yrow[p].real();
                im -= gf[p] * yrow[p].imag();
            }
            gk[lm * n_r + i] = {re, im};
        }
    }
    for (int row = 0; row < chain.rows(); ++row) {
        int l = chain.row_l[row], n = chain.row_n[row];
        for (int m = -l; m <= l; ++m) {
            std::size_t lm = SpectralTables::lm_index(l, m);
            std::complex<double> a = coeffs.at(n, l, m);
            std::complex<double> ga = {0.0, 0.0};
            for (int i = 0; i < n_r; ++i) {
                std::complex<double> g = gk[lm * n_r + i];
                double w = rows[static_cast<std::size_t>(row) * n_r + i];
                ga += w * g;
                g_rows[static_cast<std::size_t>(row) * n_r + i] +=
                    a.real() * g.real() + a.imag() * g.imag();
            }
            gcoeffs.at(n, l, m) += ga;
        }
    }
}

}  // namespace detail

// Per-kernel correlation fields of a coefficient set, without normalization or
// nonlinearity.  This is the layer primitive the network stacks.
inline FeatureMap conv_features(const Moments& coeffs, const std::vector<KernelSpectrum>& kernels,
                                ConvKind kind, const LearnContext& ctx) {
    const BasisSet& basis = *ctx.basis;
    if (coeffs.n_max != basis.n_max)
        throw std::domain_error("coefficient band limit does not match the basis");
    if (kind == ConvKind::Blended && basis.mode != Mode::Exponential)
        throw input_error("blended convolution requires the exponential mode");
    detail::ChainRows chain = detail::chain_rows(basis.n_max);
    FeatureMap out(static_cast<int>(kernels.size()), ctx.lattice.n_r, ctx.lattice.n_theta,
                   ctx.lattice.n_phi);
    std::vector<std::complex<double>> kbuf;
    for (std::size_t c = 0; c < kernels.size(); ++c) {
        std::vector<double> rows = detail::kernel_rows(kernels[c], kind, ctx, chain);
        detail::apply_kernel(coeffs, rows, chain, ctx, kbuf, out.channel(static_cast<int>(c)));
    }
    return out;
}

// One binned shape prepared for the network: moments of the primitive radial
// profiles, which every projection of the sample factors through.
struct PreparedSample {
    std::vector<std::complex<double>> prim;
    int label = 0;
};

inline PreparedSample prepare_sample(const BallGrid& grid, const BasisSet& basis,
                                     const SpectralTables& input_tables, int label = 0) {
    return {primitive_moments(grid, input_tables), label};
}

namespace detail {

struct StepTables {
    ChainRows chain;
    std::vector<std::vector<double>> r1, r2;
};

inline StepTables make_step_tables(const NetworkParams& p, const LearnContext& ctx) {
    StepTables st;
    st.chain = chain_rows(p.n_max);
    for (const KernelSpectrum& k : p.layer1)
        st.r1.push_back(kernel_rows(k, p.conv, ctx, st.chain));
    for (const KernelSpectrum& k : p.layer2)
        st.r2.push_back(kernel_rows(k, p.conv, ctx, st.chain));
    return st;
}

// All intermediates of one sample's forward pass that the backward pass reads,
// plus reusable scratch.
struct Workspace {
    Moments t, a, ssum;
    std::vector<Moments> u;                  // per layer-1 channel
    std::vector<std::complex<double>> m2;    // [c][d][lm]
    std::vector<double> f1, xh1, g1;         // [c][cell]
    std::vector<double> f2, xh2, g2;         // [o][cell]
    std::vector<double> s1, s2;              // per group stddev
    std::vector<double> z, logits;

    // scratch
    std::vector<std::complex<double>> kbuf, gk, a2, ga2, gm2c;
    std::vector<double> zw, gz1, gf1, gf2, gz;
    Moments ga, gt, gssum, gu;
    std::vector<std::vector<double>> gq;
    std::vector<double> gnu;
    std::vector<double> grow;
};

inline Workspace make_workspace(const NetworkParams& p, const LearnContext& ctx) {
    Workspace w;
    int L = p.n_max;
    std::size_t n_lm = ctx.lattice.n_lm;
    std::size_t cells = p.lattice_cells();
    w.t = Moments(L);
    w.a = Moments(L);
    w.ssum = Moments(L);
    w.u.assign(kLayer1Kernels, Moments(L));
    w.m2.assign(kLayer1Kernels * (L + 1) * n_lm, {0.0, 0.0});
    w.f1.assign(kLayer1Kernels * cells, 0.0);
    w.xh1.assign(kLayer1Kernels * cells, 0.0);
    w.g1.assign(kLayer1Kernels * cells, 0.0);
    w.f2.assign(kLayer2Kernels * cells, 0.0);
    w.xh2.assign(kLayer2Kernels * cells, 0.0);
    w.g2.assign(kLayer2Kernels * cells, 0.0);
    w.s1.assign(p.groups1, 0.0);
    w.s2.assign(p.groups2, 0.0);
    w.z.assign(p.feature_count(), 0.0);
    w.logits.assign(p.classes, 0.0);
    w.a2.assign(n_lm * ctx.lattice.n_r, {0.0, 0.0});
    w.ga2.assign(n_lm * ctx.lattice.n_r, {0.0, 0.0});
    w.gm2c.assign(static_cast<std::size_t>(L + 1) * n_lm, {0.0, 0.0});
    w.zw.assign(cells, 0.0);
    w.gz1.assign(kLayer1Kernels * cells, 0.0);
    w.gf1.assign(kLayer1Kernels * cells, 0.0);
    w.gf2.assign(kLayer2Kernels * cells, 0.0);
    w.gz.assign(p.feature_count(), 0.0);
    w.ga = Moments(L);
    w.gt = Moments(L);
    w.gssum = Moments(L);
    w.gu = Moments(L);
    w.gq.assign(BasisSet::triangle_index(L + 1, 0), std::vector<double>(L + 1, 0.0));
    w.gnu.assign(BasisSet::triangle_index(L + 1, 0), 0.0);
    w.grow.assign(static_cast<std::size_t>(chain_rows(L).rows()) * ctx.lattice.n_r, 0.0);
    return w;
}

inline void check_network(const NetworkParams& p, const LearnContext& ctx) {
    const BasisSet& basis = *ctx.basis;
    if (p.n_max != basis.n_max)
        throw input_error("network band limit does not match the basis");
    if (p.conv == ConvKind::Blended && basis.mode != Mode::Exponential)
        throw input_error("blended convolution requires the exponential mode");
    if (p.lat_r != ctx.lattice.n_r || p.lat_theta != ctx.lattice.n_theta ||
        p.lat_phi != ctx.lattice.n_phi)
        throw input_error("network lattice does not match the context");
    if (p.classes < 2) throw input_error("network needs at least two classes");
    if (static_cast<int>(p.layer1.size()) != kLayer1Kernels ||
        static_cast<int>(p.layer2.size()) != kLayer2Kernels)
        throw input_error("kernel bank sizes must be 4 and 16");
    if (p.groups1 < 1 || kLayer1Kernels % p.groups1 != 0 || p.groups2 < 1 ||
        kLayer2Kernels % p.groups2 != 0)
        throw input_error("group counts must divide the kernel counts");
    if (p.fc_weight.size() != static_cast<std::size_t>(p.classes) * p.feature_count() ||
        p.fc_bias.size() != static_cast<std::size_t>(p.classes))
        throw input_error("fully connected dimensions do not match the feature lattice");
    if (!(p.gn_eps > 0.0)) throw input_error("group norm eps must be positive");
}

// Projection of primitive moments onto the mixed family with synthesis
// normalization: out_nlm = (sum_d q_nl[d] prim[d][lm]) / nu_nl.
inline void project_coeffs(const std::vector<std::complex<double>>& prim,
                           const ProjectionState& ps, int n_max, std::size_t n_lm, Moments& t,
                           Moments& a) {
    for (int n = 1; n <= n_max; ++n)
        for (int l = 0; l <= n; ++l) {
            std::size_t tri = BasisSet::triangle_index(n, l);
            const std::vector<double>& q = ps.q[tri];
            double nu = ps.nu[tri];
            for (int m = -l; m <= l; ++m) {
                std::size_t lm = SpectralTables::lm_index(l, m);
                std::complex<double> sum = 0.0;
                for (int d = 0; d <= n_max; ++d)
                    if (q[d] != 0.0) sum += q[d] * prim[static_cast<std::size_t>(d) * n_lm + lm];
                t.at(n, l, m) = sum;
                a.at(n, l, m) = (nu > 0.0) ? sum / nu : std::complex<double>(0.0, 0.0);
            }
        }
}

inline void forward_trace(const NetworkParams& p, const ProjectionState& ps,
                          const StepTables& st, const std::vector<std::complex<double>>& prim,
                          const LearnContext& ctx, Workspace& w) {
    const SpectralTables& t = ctx.lattice;
    int L = p.n_max;
    std::size_t n_lm = t.n_lm;
    std::size_t cells = p.lattice_cells();
    std::size_t n_ang = static_cast<std::size_t>(t.n_theta) * t.n_phi;
    if (prim.size() != static_cast<std::size_t>(L + 1) * n_lm)
        throw input_error("prepared sample does not match the band limit");

    project_coeffs(prim, ps, L, n_lm, w.t, w.a);

    for (int c = 0; c < kLayer1Kernels; ++c)
        apply_kernel(w.a, st.r1[c], st.chain, ctx, w.kbuf, w.f1.data() + c * cells);
    gn_forward(w.f1.data(), kLayer1Kernels, p.groups1, cells, p.gn1_scale, p.gn1_shift,
               p.gn_eps, w.xh1.data(), w.s1.data(), w.g1.data());

    std::fill(w.ssum.values.begin(), w.ssum.values.end(), std::complex<double>(0.0, 0.0));
    for (int c = 0; c < kLayer1Kernels; ++c) {
        const double* g1c = w.g1.data() + c * cells;
        // relu then angular analysis per shell
        for (int i = 0; i < t.n_r; ++i)
            for (std::size_t pp = 0; pp < n_ang; ++pp) {
                double v = g1c[static_cast<std::size_t>(i) * n_ang + pp];
                w.zw[static_cast<std::size_t>(i) * n_ang + pp] =
                    (v > 0.0 ? v : 0.0) * ctx.wa[pp];
            }
        for (std::size_t lm = 0; lm < n_lm; ++lm) {
            const std::complex<double>* yrow = &t.y[lm * n_ang];
            for (int i = 0; i < t.n_r; ++i) {
                const double* zrow = w.zw.data() + static_cast<std::size_t>(i) * n_ang;
                double re = 0.0, im = 0.0;
                for (std::size_t pp = 0; pp < n_ang; ++pp) {
                    re += zrow[pp] * yrow[pp].real();
                    im -= zrow[pp] * yrow[pp].imag();
                }
                w.a2[lm * t.n_r + i] = {re, im};
            }
        }
        std::complex<double>* m2c = w.m2.data() + static_cast<std::size_t>(c) * (L + 1) * n_lm;
        for (int d = 0; d <= L; ++d)
            for (std::size_t lm = 0; lm < n_lm; ++lm) {
                std::complex<double> sum = 0.0;
                for (int i = 0; i < t.n_r; ++i)
                    sum += t.prim[static_cast<std::size_t>(d) * t.n_r + i] * t.w_rad[i] *
                           w.a2[lm * t.n_r + i];
                m2c[static_cast<std::size_t>(d) * n_lm + lm] = sum;
            }
        Moments& u = w.u[c];
        for (int n = 1; n <= L; ++n)
            for (int l = 0; l <= n; ++l) {
                std::size_t tri = BasisSet::triangle_index(n, l);
                const std::vector<double>& q = ps.q[tri];
                double nu = ps.nu[tri];
                for (int m = -l; m <= l; ++m) {
                    std::size_t lm = SpectralTables::lm_index(l, m);
                    std::complex<double> sum = 0.0;
                    for (int d = 0; d <= L; ++d)
                        if (q[d] != 0.0)
                            sum += q[d] * m2c[static_cast<std::size_t>(d) * n_lm + lm];
                    u.at(n, l, m) = sum;
                    if (nu > 0.0) w.ssum.at(n, l, m) += sum / nu;
                }
            }
    }

    for (int o = 0; o < kLayer2Kernels; ++o)
        apply_kernel(w.ssum, st.r2[o], st.chain, ctx, w.kbuf, w.f2.data() + o * cells);
    gn_forward(w.f2.data(), kLayer2Kernels, p.groups2, cells, p.gn2_scale, p.gn2_shift,
               p.gn_eps, w.xh2.data(), w.s2.data(), w.g2.data());

    for (std::size_t f = 0; f < w.z.size(); ++f) w.z[f] = std::max(w.g2[f], 0.0);
    for (int cls = 0; cls < p.classes; ++cls) {
        const double* row = p.fc_weight.data() + static_cast<std::size_t>(cls) * w.z.size();
        double sum = p.fc_bias[cls];
        for (std::size_t f = 0; f < w.z.size(); ++f) sum += row[f] * w.z[f];
        w.logits[cls] = sum;
    }
}

inline void backward_trace(const NetworkParams& p, const ProjectionState& ps,
                           const StepTables& st, const std::vector<std::complex<double>>& prim,
                           const LearnContext& ctx, Workspace& w, int label, double weight,
                           ParamGradients& g) {
    const SpectralTables& t = ctx.lattice;
    int L = p.n_max;
    std::size_t n_lm = t.n_lm;
    std::size_t cells = p.lattice_cells();
    std::size_t n_ang = static_cast<std::size_t>(t.n_theta) * t.n_phi;

    // softmax cross entropy head
    double mx = *std::max_element(w.logits.begin(), w.logits.end());
    double denom = 0.0;
    for (double v : w.logits) denom += std::exp(v - mx);
    for (int cls = 0; cls < p.classes; ++cls) {
        double soft = std::exp(w.logits[cls] - mx) / denom;
        double glog = (soft - (cls == label ? 1.0 : 0.0)) * weight;
        g.fc_bias[cls] += glog;
        double* grow = g.fc_weight.data() + static_cast<std::size_t>(cls) * w.z.size();
        const double* prow = p.fc_weight.data() + static_cast<std::size_t>(cls) * w.z.size();
        for (std::size_t f = 0; f < w.z.size(); ++f) {
            grow[f] += glog * w.z[f];
            w.gz[f] = (cls == 0 ? 0.0 : w.gz[f]) + glog * prow[f];
        }
    }
    for (std::size_t f = 0; f < w.gz.size(); ++f)
        if (w.g2[f] <= 0.0) w.gz[f] = 0.0;

    gn_backward(w.xh2.data(), w.s2.data(), kLayer2Kernels, p.groups2, cells, p.gn2_scale,
                w.gz.data(), w.gf2.data(), g.gn2_scale, g.gn2_shift);

    std::fill(w.gssum.values.begin(), w.gssum.values.end(), std::complex<double>(0.0, 0.0));
    for (int o = 0; o < kLayer2Kernels; ++o) {
        std::fill(w.grow.begin(), w.grow.end(), 0.0);
        apply_kernel_backward(w.ssum, st.r2[o], st.chain, ctx, w.gf2.data() + o * cells, w.gk,
                              w.gssum, w.grow);
        kernel_rows_backward(w.grow, p.conv, ctx, st.chain, g.layer2[o]);
    }

    // per sample accumulators for the projection path
    for (auto& v : w.gq) std::fill(v.begin(), v.end(), 0.0);
    std::fill(w.gnu.begin(), w.gnu.end(), 0.0);

    std::fill(w.gz1.begin(), w.gz1.end(), 0.0);
    for (int c = 0; c < kLayer1Kernels; ++c) {
        const std::complex<double>* m2c =
            w.m2.data() + static_cast<std::size_t>(c) * (L + 1) * n_lm;
        std::fill(w.gm2c.begin(), w.gm2c.end(), std::complex<double>(0.0, 0.0));
        for (int n = 1; n <= L; ++n)
            for (int l = 0; l <= n; ++l) {
                std::size_t tri = BasisSet::triangle_index(n, l);
                const std::vector<double>& q = ps.q[tri];
                double nu = ps.nu[tri];
                if (!(nu > 0.0)) continue;
                double gnu_acc = 0.0;
                for (int m = -l; m <= l; ++m) {
                    std::size_t lm = SpectralTables::lm_index(l, m);
                    std::complex<double> gs = w.gssum.at(n, l, m);
                    std::complex<double> gu = gs / nu;
                    std::complex<double> uval = w.u[c].at(n, l, m);
                    gnu_acc -= (uval.real() * gs.real() + uval.imag() * gs.imag()) / (nu * nu);
                    for (int d = 0; d <= L; ++d) {
                        std::complex<double> m2v = m2c[static_cast<std::size_t>(d) * n_lm + lm];
                        w.gq[tri][d] += m2v.real() * gu.real() + m2v.imag() * gu.imag();
                        w.gm2c[static_cast<std::size_t>(d) * n_lm + lm] += q[d] * gu;
                    }
                }
                w.gnu[tri] += gnu_acc;
            }
        for (std::size_t lm = 0; lm < n_lm; ++lm)
            for (int i = 0; i < t.n_r; ++i) {
                std::complex<double> acc = 0.0;
                for (int d = 0; d <= L; ++d)
                    acc += t.prim[static_cast<std::size_t>(d) * t.n_r + i] * t.w_rad[i] *
                           w.gm2c[static_cast<std::size_t>(d) * n_lm + lm];
                w.ga2[lm * t.n_r + i] = acc;
            }
        double* gz1c = w.gz1.data() + c * cells;
        const double* g1c = w.g1.data() + c * cells;
        for (std::size_t lm = 0; lm < n_lm; ++lm) {
            const std::complex<double>* yrow = &t.y[lm * n_ang];
            for (int i = 0; i < t.n_r; ++i) {
                std::complex<double> ga2 = w.ga2[lm * t.n_r + i];
                if (ga2 == std::complex<double>(0.0, 0.0)) continue;
                double* grow_out = gz1c + static_cast<std::size_t>(i) * n_ang;
                for (std::size_t pp = 0; pp < n_ang; ++pp)
                    grow_out[pp] += ctx.wa[pp] * (yrow[pp].real() * ga2.real() -
                                                  yrow[pp].imag() * ga2.imag());
            }
        }
        for (std::size_t pp = 0; pp < cells; ++pp)
            if (g1c[pp] <= 0.0) gz1c[pp] = 0.0;
    }

    gn_backward(w.xh1.data(), w.s1.data(), kLayer1Kernels, p.groups1, cells, p.gn1_scale,
                w.gz1.data(), w.gf1.data(), g.gn1_scale, g.gn1_shift);

    std::fill(w.ga.values.begin(), w.ga.values.end(), std::complex<double>(0.0, 0.0));
    for (int c = 0; c < kLayer1Kernels; ++c) {
        std::fill(w.grow.begin(), w.grow.end(), 0.0);
        apply_kernel_backward(w.a, st.r1[c], st.chain, ctx, w.gf1.data() + c * cells, w.gk,
                              w.ga, w.grow);
        kernel_rows_backward(w.grow, p.conv, ctx, st.chain, g.layer1[c]);
    }

    for (int n = 1; n <= L; ++n)
        for (int l = 0; l <= n; ++l) {
            std::size_t tri = BasisSet::triangle_index(n, l);
            double nu = ps.nu[tri];
            if (!(nu > 0.0)) continue;
            double gnu_acc = 0.0;
            for (int m = -l; m <= l; ++m) {
                std::size_t lm = SpectralTables::lm_index(l, m);
                std::complex<double> ga = w.ga.at(n, l, m);
                std::complex<double> gt = ga / nu;
                std::complex<double> tv = w.t.at(n, l, m);
                gnu_acc -= (tv.real() * ga.real() + tv.imag() * ga.imag()) / (nu * nu);
                for (int d = 0; d <= L; ++d) {
                    std::complex<double> pv = prim[static_cast<std::size_t>(d) * n_lm + lm];
                    w.gq[tri][d] += pv.real() * gt.real() + pv.imag() * gt.imag();
                }
            }
            w.gnu[tri] += gnu_acc;
        }

    // nu = q^T G q
    int dim = L + 1;
    for (int n = 0; n <= L; ++n)
        for (int l = 0; l <= n; ++l) {
            std::size_t tri = BasisSet::triangle_index(n, l);
            if (w.gnu[tri] == 0.0) continue;
            for (int d = 0; d < dim; ++d) {
                double acc = 0.0;
                for (int d2 = 0; d2 < dim; ++d2)
                    acc += ctx.prim_gram[static_cast<std::size_t>(d) * dim + d2] *
                           ps.q[tri][d2];
                w.gq[tri][d] += 2.0 * w.gnu[tri] * acc;
            }
        }

    // reverse of the mixing recursion q_nl = f_nl - sum W q_k mu
    for (int n = L; n >= 0; --n)
        for (int l = n; l >= 0; --l) {
            std::size_t tri = BasisSet::triangle_index(n, l);
            for (int k = n - 1; k >= 0; --k)
                for (int mu = k; mu >= 0; --mu) {
                    std::size_t tk = BasisSet::triangle_index(k, mu);
                    double dot = 0.0;
                    for (int d = 0; d < dim; ++d) dot += ps.q[tk][d] * w.gq[tri][d];
                    g.projection.at(n, l, k, mu) -= dot;
                    double c = p.projection.get(n, l, k, mu);
                    if (c != 0.0)
                        for (int d = 0; d < dim; ++d) w.gq[tk][d] -= c * w.gq[tri][d];
                }
        }
}

inline void check_finite_block(const std::vector<double>& v, const char* name) {
    for (double x : v)
        if (!std::isfinite(x))
            throw numerical_error(std::string("non-finite gradient in the ") + name +
                                  " block");
}

}  // namespace detail

inline double loss(const std::vector<double>& logits, int label) {
    if (logits.empty()) throw input_error("loss needs at least one logit");
    if (label < 0 || label >= static_cast<int>(logits.size()))
        throw input_error("label outside the class range");
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    return mx + std::log(sum) - logits[label];
}

inline std::vector<double> loss_gradient(const std::vector<double>& logits, int label) {
    if (label < 0 || label >= static_cast<int>(logits.size()))
        throw input_error("label outside the class range");
    double mx = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double v : logits) denom += std::exp(v - mx);
    std::vector<double> g(logits.size());
    for (std::size_t c = 0; c < logits.size(); ++c)
        g[c] = std::exp(logits[c] - mx) / denom - (static_cast<int>(c) == label ? 1.0 : 0.0);
    return g;
}

inline std::vector<double> forward(const NetworkParams& p, const PreparedSample& sample,
                                   const LearnContext& ctx) {
    detail::check_network(p, ctx);
    ProjectionState ps = make_projection_state(p.projection, ctx);
    detail::StepTables st = detail::make_step_tables(p, ctx);
    detail::Workspace w = detail::make_workspace(p, ctx);
    detail::forward_trace(p, ps, st, sample.prim, ctx, w);
    return w.logits;
}

struct ForwardResult {
    std::vector<double> logits;
    FeatureMap features;  // second layer output, post norm and relu
};

inline ForwardResult forward_full(const NetworkParams& p, const BallGrid& grid,
                                  const BasisSet& basis) {
    LearnContext ctx = make_learn_context(basis, p.lattice_shape());
    detail::check_network(p, ctx);
    SpectralTables input_tables = make_tables(basis, grid);
    PreparedSample sample = prepare_sample(grid, basis, input_tables);
    ProjectionState ps = make_projection_state(p.projection, ctx);
    detail::StepTables st = detail::make_step_tables(p, ctx);
    detail::Workspace w = detail::make_workspace(p, ctx);
    detail::forward_trace(p, ps, st, sample.prim, ctx, w);
    ForwardResult out;
    out.logits = w.logits;
    out.features = FeatureMap(kLayer2Kernels, p.lat_r, p.lat_theta, p.lat_phi);
    for (std::size_t f = 0; f < out.features.values.size(); ++f)
        out.features.values[f] = std::max(w.g2[f], 0.0);
    return out;
}

inline std::vector<double> forward(const NetworkParams& p, const BallGrid& grid,
                                   const BasisSet& basis) {
    return forward_full(p, grid, basis).logits;
}

inline double batch_loss(const NetworkParams& p, const std::vector<const PreparedSample*>& batch,
                         const LearnContext& ctx) {
    if (batch.empty()) throw input_error("batch must be nonempty");
    detail::check_network(p, ctx);
    ProjectionState ps = make_projection_state(p.projection, ctx);
    detail::StepTables st = detail::make_step_tables(p, ctx);
    detail::Workspace w = detail::make_workspace(p, ctx);
    double total = 0.0;
    for (const PreparedSample* s : batch) {
        detail::forward_trace(p, ps, st, s->prim, ctx, w);
        total += loss(w.logits, s->label);
    }
    return total / static_cast<double>(batch.size());
}

inline double batch_loss(const NetworkParams& p, const std::vector<PreparedSample>& batch,
                         const LearnContext& ctx) {
    std::vector<const PreparedSample*> ptrs;
    for (const auto& s : batch) ptrs.push_back(&s);
    return batch_loss(p, ptrs, ctx);
}

// Reverse-mode gradient of the mean batch loss for every trainable block.
// Masked blocks come back exactly zero.
inline ParamGradients gradient(const NetworkParams& p,
                               const std::vector<const PreparedSample*>& batch,
                               const LearnContext& ctx, const GradMask& mask = {},
                               double* mean_loss = nullptr) {
    if (batch.empty()) throw input_error("gradient needs a nonempty batch");
    detail::check_network(p, ctx);
    ProjectionState ps = make_projection_state(p.projection, ctx);
    detail::StepTables st = detail::make_step_tables(p, ctx);
    detail::Workspace w = detail::make_workspace(p, ctx);
    ParamGradients g = zero_gradients(p);
    double total = 0.0;
    double weight = 1.0 / static_cast<double>(batch.size());
    for (const PreparedSample* s : batch) {
        detail::forward_trace(p, ps, st, s->prim, ctx, w);
        total += loss(w.logits, s->label);
        detail::backward_trace(p, ps, st, s->prim, ctx, w, s->label, weight, g);
    }
    if (!mask.projection) std::fill(g.projection.data().begin(), g.projection.data().end(), 0.0);
    if (!mask.kernels) {
        for (auto& k : g.layer1) std::fill(k.values.begin(), k.values.end(), 0.0);
        for (auto& k : g.layer2) std::fill(k.values.begin(), k.values.end(), 0.0);
    }
    if (!mask.affines) {
        std::fill(g.gn1_scale.begin(), g.gn1_scale.end(), 0.0);
        std::fill(g.gn1_shift.begin(), g.gn1_shift.end(), 0.0);
        std::fill(g.gn2_scale.begin(), g.gn2_scale.end(), 0.0);
        std::fill(g.gn2_shift.begin(), g.gn2_shift.end(), 0.0);
    }
    if (!mask.fc) {
        std::fill(g.fc_weight.begin(), g.fc_weight.end(), 0.0);
        std::fill(g.fc_bias.begin(), g.fc_bias.end(), 0.0);
    }
    detail::check_finite_block(g.projection.data(), "projection weight");
    for (const auto& k : g.layer1) detail::check_finite_block(k.values, "layer 1 kernel");
    for (const auto& k : g.layer2) detail::check_finite_block(k.values, "layer 2 kernel");
    detail::check_finite_block(g.gn1_scale, "group norm affine");
    detail::check_finite_block(g.gn1_shift, "group norm affine");
    detail::check_finite_block(g.gn2_scale, "group norm affine");
    detail::check_finite_block(g.gn2_shift, "group norm affine");
    detail::check_finite_block(g.fc_weight, "fully connected");
    detail::check_finite_block(g.fc_bias, "fully connected");
    if (mean_loss) *mean_loss = total / static_cast<double>(batch.size());
    return g;
}

inline ParamGradients gradient(const NetworkParams& p, const std::vector<PreparedSample>& batch,
                               const LearnContext& ctx, const GradMask& mask = {},
                               double* mean_loss = nullptr) {
    std::vector<const PreparedSample*> ptrs;
    for (const auto& s : batch) ptrs.push_back(&s);
    return gradient(p, ptrs, ctx, mask, mean_loss);
}

inline double accuracy(const NetworkParams& p, const std::vector<PreparedSample>& samples,
                       const LearnContext& ctx) {
    if (samples.empty()) throw input_error("accuracy needs at least one sample");
    detail::check_network(p, ctx);
    ProjectionState ps = make_projection_state(p.projection, ctx);
    detail::StepTables st = detail::make_step_tables(p, ctx);
    detail::Workspace w = detail::make_workspace(p, ctx);
    std::size_t correct = 0;
    for (const auto& s : samples) {
        detail::forward_trace(p, ps, st, s.prim, ctx, w);
        int best = 0;
        for (int c = 1; c < p.classes; ++c)
            if (w.logits[c] > w.logits[best]) best = c;
        if (best == s.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

// ---------------------------------------------------------------------------
// datasets and training

struct Dataset {
    std::vector<PointCloud> clouds;
    std::vector<int> labels;
    int classes = 0;
};

// Three parametric surfaces, 1024 points each, Gaussian jitter, uniform random
// pose.  Class 0 is a spherical shell, class 1 a cube surface, class 2 a
// torus.
inline Dataset make_synthetic_dataset(int per_class, double jitter, unsigned long long seed) {
    if (per_class < 1) throw input_error("per_class must be at least 1");
    if (jitter < 0.0) throw input_error("jitter must be nonnegative");
    constexpr int kPoints = 1024;
    Dataset out;
    out.classes = 3;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double two_pi = 2.0 * std::numbers::pi;

    auto sample_point = [&](int cls) -> std::array<double, 3> {
        if (cls == 0) {
            double x, y, z, n2;
            do {
                x = gauss(rng);
                y = gauss(rng);
                z = gauss(rng);
                n2 = x * x + y * y + z * z;
            } while (n2 < 1e-12);
            double inv = 1.0 / std::sqrt(n2);
            return {x * inv, y * inv, z * inv};
        }
        if (cls == 1) {
            int face = std::min(static_cast<int>(unit(rng) * 6.0), 5);
            double a = 2.0 * unit(rng) - 1.0;
            double b = 2.0 * unit(rng) - 1.0;
            switch (face) {
                case 0: return {1.0, a, b};
                case 1: return {-1.0, a, b};
                case 2: return {a, 1.0, b};
                case 3: return {a, -1.0, b};
                case 4: return {a, b, 1.0};
                default: return {a, b, -1.0};
            }
        }
        double major = 1.0, minor = 0.35;
        double v;
        do {
            v = two_pi * unit(rng);
        } while (unit(rng) > (major + minor * std::cos(v)) / (major + minor));
        double u = two_pi * unit(rng);
        double ring = major + minor * std::cos(v);
        return {ring * std::cos(u), ring * std::sin(u), minor * std::sin(v)};
    };

    for (int cls = 0; cls < 3; ++cls)
        for (int s = 0; s < per_class; ++s) {
            double u1 = unit(rng), u2 = unit(rng), u3 = unit(rng);
            double qx = std::sqrt(1.0 - u1) * std::sin(two_pi * u2);
            double qy = std::sqrt(1.0 - u1) * std::cos(two_pi * u2);
            double qz = std::sqrt(u1) * std::sin(two_pi * u3);
            double qw = std::sqrt(u1) * std::cos(two_pi * u3);
            double rot[3][3] = {
                {1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qz * qw), 2 * (qx * qz + qy * qw)},
                {2 * (qx * qy + qz * qw), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qx * qw)},
                {2 * (qx * qz - qy * qw), 2 * (qy * qz + qx * qw), 1 - 2 * (qx * qx + qy * qy)}};
            PointCloud cloud;
            cloud.points.reserve(kPoints);
            for (int i = 0; i < kPoints; ++i) {
                std::array<double, 3> pt = sample_point(cls);
                if (jitter > 0.0)
                    for (int c = 0; c < 3; ++c) pt[c] += jitter * gauss(rng);
                cloud.points.push_back({rot[0][0] * pt[0] + rot[0][1] * pt[1] + rot[0][2] * pt[2],
                                        rot[1][0] * pt[0] + rot[1][1] * pt[1] + rot[1][2] * pt[2],
                                        rot[2][0] * pt[0] + rot[2][1] * pt[1] +
                                            rot[2][2] * pt[2]});
            }
            out.clouds.push_back(std::move(cloud));
            out.labels.push_back(cls);
        }
    return out;
}

inline std::vector<BallGrid> bin_dataset(const Dataset& ds, int n_r, int n_theta, int n_phi) {
    std::vector<BallGrid> grids;
    grids.reserve(ds.clouds.size());
    for (const PointCloud& c : ds.clouds)
        grids.push_back(bin_cloud(normalize_cloud(c), n_r, n_theta, n_phi));
    return grids;
}

inline std::vector<PreparedSample> prepare_dataset(const std::vector<BallGrid>& grids,
                                                   const std::vector<int>& labels,
                                                   const BasisSet& basis) {
    if (grids.size() != labels.size())
        throw input_error("grid and label counts do not match");
    if (grids.empty()) throw input_error("dataset is empty");
    SpectralTables tables = make_tables(basis, grids.front());
    std::vector<PreparedSample> out;
    out.reserve(grids.size());
    for (std::size_t i = 0; i < grids.size(); ++i) {
        if (!grids[i].same_shape(grids.front()))
            throw input_error("all dataset grids must share one shape");
        out.push_back(prepare_sample(grids[i], basis, tables, labels[i]));
    }
    return out;
}

struct TrainConfig {
    double lr_polynomial = 1e-5;
    double lr_kernel = 1e-2;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    int iters_polynomial = 500;
    int iters_kernel = 2000;
    int batch_size = 16;
    unsigned long long seed = 0;
    int grid_r = 25, grid_theta = 36, grid_phi = 18;
    int lat_r = 8, lat_theta = 8, lat_phi = 8;
    ConvKind conv = ConvKind::Blended;

    void validate() const {
        if (!(lr_polynomial > 0.0) || !(lr_kernel > 0.0))
            throw input_error("learning rates must be positive");
        if (iters_polynomial < 0 || iters_kernel < 0)
            throw input_error("iteration counts must be nonnegative");
        if (batch_size < 1) throw input_error("batch size must be positive");
        if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0 && adam_eps > 0.0))
            throw input_error("optimizer constants out of range");
        if (grid_r < 1 || grid_theta < 1 || grid_phi < 1 || lat_r < 1 || lat_theta < 1 ||
            lat_phi < 1)
            throw input_error("grid and lattice dimensions must be positive");
    }
};

struct HistoryRow {
    int step = 0;
    int phase = 0;
    double loss = 0.0;
};

struct TrainResult {
    NetworkParams params;
    std::vector<HistoryRow> history;
    bool diverged = false;
};

namespace detail {

inline void collect_blocks(NetworkParams& p, bool phase2,
                           std::vector<std::vector<double>*>& out) {
    out.clear();
    if (!phase2) {
        out.push_back(&p.projection.data());
        return;
    }
    for (auto& k : p.layer1) out.push_back(&k.values);
    for (auto& k : p.layer2) out.push_back(&k.values);
    out.push_back(&p.gn1_scale);
    out.push_back(&p.gn1_shift);
    out.push_back(&p.gn2_scale);
    out.push_back(&p.gn2_shift);
    out.push_back(&p.fc_weight);
    out.push_back(&p.fc_bias);
}

inline void collect_blocks(ParamGradients& g, bool phase2,
                           std::vector<std::vector<double>*>& out) {
    out.clear();
    if (!phase2) {
        out.push_back(&g.projection.data());
        return;
    }
    for (auto& k : g.layer1) out.push_back(&k.values);
    for (auto& k : g.layer2) out.push_back(&k.values);
    out.push_back(&g.gn1_scale);
    out.push_back(&g.gn1_shift);
    out.push_back(&g.gn2_scale);
    out.push_back(&g.gn2_shift);
    out.push_back(&g.fc_weight);
    out.push_back(&g.fc_bias);
}

struct Adam {
    double lr = 0.0, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    long long t = 0;
    std::vector<double> m, v;

    void reset(std::size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        t = 0;
    }

    void step(const std::vector<std::vector<double>*>& params,
              const std::vector<std::vector<double>*>& grads) {
        ++t;
        double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
        double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
        std::size_t off = 0;
        for (std::size_t b = 0; b < params.size(); ++b) {
            std::vector<double>& pv = *params[b];
            const std::vector<double>& gv = *grads[b];
            for (std::size_t i = 0; i < pv.size(); ++i, ++off) {
                double g = gv[i];
                m[off] = b1 * m[off] + (1.0 - b1) * g;
                v[off] = b2 * v[off] + (1.0 - b2) * g * g;
                pv[i] -= lr * (m[off] / c1) / (std::sqrt(v[off] / c2) + eps);
            }
        }
    }
};

}  // namespace detail

// Two-phase schedule: phase 1 moves only the projection weights, phase 2 only
// the kernels, norm affines, and the head.  Optimizer state resets between
// phases.  Training stops early if the loss passes 1e6.
inline TrainResult train(const Dataset& ds, const TrainConfig& cfg, const BasisSet& basis) {
    cfg.validate();
    if (ds.classes < 2) throw input_error("training needs at least two classes");
    if (ds.clouds.empty()) throw input_error("training dataset is empty");
    for (int lbl : ds.labels)
        if (lbl < 0 || lbl >= ds.classes) throw input_error("label outside the class range");

    std::vector<BallGrid> grids = bin_dataset(ds, cfg.grid_r, cfg.grid_theta, cfg.grid_phi);
    std::vector<PreparedSample> samples = prepare_dataset(grids, ds.labels, basis);
    LearnContext ctx = make_learn_context(basis, BallGrid(cfg.lat_r, cfg.lat_theta, cfg.lat_phi));

    TrainResult out;
    out.params = init_params(basis, BallGrid(cfg.lat_r, cfg.lat_theta, cfg.lat_phi), ds.classes,
                             cfg.seed, cfg.conv);
    std::mt19937_64 batch_rng(cfg.seed + 1);
    std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);

    detail::Adam adam;
    adam.b1 = cfg.beta1;
    adam.b2 = cfg.beta2;
    adam.eps = cfg.adam_eps;
    std::vector<std::vector<double>*> pblocks, gblocks;
    std::vector<const PreparedSample*> batch(cfg.batch_size);

    int global_step = 0;
    for (int phase = 1; phase <= 2 && !out.diverged; ++phase) {
        bool phase2 = (phase == 2);
        int iters = phase2 ? cfg.iters_kernel : cfg.iters_polynomial;
        adam.lr = phase2 ? cfg.lr_kernel : cfg.lr_polynomial;
        GradMask mask;
        mask.projection = !phase2;
        mask.kernels = mask.affines = mask.fc = phase2;
        detail::collect_blocks(out.params, phase2, pblocks);
        std::size_t total = 0;
        for (auto* b : pblocks) total += b->size();
        adam.reset(total);
        for (int it = 0; it < iters; ++it) {
            for (int b = 0; b < cfg.batch_size; ++b) batch[b] = &samples[pick(batch_rng)];
            double mean_loss = 0.0;
            ParamGradients g = gradient(out.params, batch, ctx, mask, &mean_loss);
            out.history.push_back({global_step++, phase, mean_loss});
            if (!(mean_loss <= 1e6)) {
                out.diverged = true;
                break;
            }
            detail::collect_blocks(g, phase2, gblocks);
            adam.step(pblocks, gblocks);
        }
    }
    return out;
}

}  // namespace ballspec
