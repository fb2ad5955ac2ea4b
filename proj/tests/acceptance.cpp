// Release gate: every shipping criterion as one self-reporting check.  Run
// with no arguments for the full sweep, or with --criterion N for a single
// one.  Each criterion prints exactly one [PASS]/[FAIL] line with measured
// numbers; the exit status is zero only when every selected criterion passed.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ballspec/basis.hpp"
#include "ballspec/basis_report.hpp"
#include "ballspec/convolution.hpp"
#include "ballspec/harmonics.hpp"
#include "ballspec/learn.hpp"
#include "ballspec/pointcloud.hpp"
#include "ballspec/quadrature.hpp"
#include "ballspec/retrieval.hpp"
#include "ballspec/transform.hpp"

#include "support/rodrigues.hpp"

using namespace ballspec;
using std::numbers::pi;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Random coefficients with the conjugate symmetry of a real field.
Moments random_field_coeffs(const BasisSet& basis, unsigned seed, double scale = 1.0) {
    Moments m(basis.n_max);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (int n = 1; n <= basis.n_max; ++n)
        for (int l = 0; l <= n; ++l) {
            m.at(n, l, 0) = dist(rng);
            for (int mm = 1; mm <= l; ++mm) {
                std::complex<double> v(dist(rng), dist(rng));
                m.at(n, l, mm) = v;
                double sign = (mm % 2 == 0) ? 1.0 : -1.0;
                m.at(n, l, -mm) = sign * std::conj(v);
            }
        }
    return m;
}

Moments random_zonal_coeffs(const BasisSet& basis, unsigned seed, double scale = 1.0) {
    Moments m(basis.n_max);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (int n = 1; n <= basis.n_max; ++n)
        for (int l = 0; l <= n; ++l) m.at(n, l, 0) = dist(rng);
    return m;
}

// Sample the field sum a_nlm Q_nl Y_lm on a lattice through the projection
// synthesis (pre-multiplying by the norms turns coefficients into moments).
BallGrid synthesize(const Moments& coeffs, const BasisSet& basis, int n_r, int n_theta,
                    int n_phi) {
    Moments scaled = coeffs;
    for (int n = 0; n <= basis.n_max; ++n)
        for (int l = 0; l <= n; ++l)
            for (int mm = -l; mm <= l; ++mm) scaled.at(n, l, mm) *= basis.norm2(n, l);
    return reconstruct(scaled, basis, BallGrid(n_r, n_theta, n_phi));
}

double grid_l2(const BallGrid& a, const BallGrid& b) {
    double num = 0.0, den = 0.0;
    for (int i = 0; i < a.n_r; ++i)
        for (int j = 0; j < a.n_theta; ++j)
            for (int k = 0; k < a.n_phi; ++k) {
                double measure = a.r_center(i) * a.r_center(i) * std::sin(a.phi_center(k));
                double d = a.at(i, j, k) - b.at(i, j, k);
                num += measure * d * d;
                den += measure * b.at(i, j, k) * b.at(i, j, k);
            }
    return std::sqrt(num / den);
}

// <Q_nl(. + shift), Q_{n2,l}> by direct quadrature on [0, 1].
double shifted_pair_integral(const BasisSet& basis, int n, int n2, int l, double shift) {
    const QuadRule& rule = gauss_legendre_01(256);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        double r = rule.nodes[i];
        sum += rule.weights[i] * r * r * basis.radial(n, l).eval(r + shift) *
               basis.radial(n2, l).eval(r);
    }
    return sum;
}

// Addresses of every trainable flat block, identically ordered for parameters
// and gradients.
template <class T>
std::vector<std::vector<double>*> all_blocks(T& x) {
    std::vector<std::vector<double>*> out;
    out.push_back(&x.projection.data());
    for (auto& k : x.layer1) out.push_back(&k.values);
    for (auto& k : x.layer2) out.push_back(&k.values);
    out.push_back(&x.gn1_scale);
    out.push_back(&x.gn1_shift);
    out.push_back(&x.gn2_scale);
    out.push_back(&x.gn2_shift);
    out.push_back(&x.fc_weight);
    out.push_back(&x.fc_bias);
    return out;
}

// Criterion 1: at band limit 5 every distinct basis element pair is
// orthogonal to 1e-9 and the derivation itself is fast.
Outcome basis_orthogonality() {
    auto t0 = std::chrono::steady_clock::now();
    BasisSet expo = orthogonalize(5, Mode::Exponential);
    BasisSet poly = orthogonalize(5, Mode::TruncatedSum);
    double derive_s = seconds_since(t0);

    double chain_e = orthogonality_residual(expo);
    double chain_p = orthogonality_residual(poly);

    // Full element sweep Z_nlm = Q_nl Y_lm, factorized into radial cross
    // integrals times the angular Gram matrix.
    AngularRule rule = angular_rule(48, 24);
    std::size_t n_nodes = rule.thetas.size() * rule.phis.size();
    std::vector<double> weights(n_nodes);
    {
        std::size_t node = 0;
        for (std::size_t j = 0; j < rule.thetas.size(); ++j)
            for (std::size_t k = 0; k < rule.phis.size(); ++k)
                weights[node++] = rule.theta_weight * rule.phi_weights[k];
    }
    std::vector<std::pair<int, int>> lm;
    for (int l = 0; l <= 5; ++l)
        for (int m = -l; m <= l; ++m) lm.emplace_back(l, m);
    std::vector<std::vector<std::complex<double>>> y(lm.size());
    for (std::size_t a = 0; a < lm.size(); ++a) {
        y[a].resize(n_nodes);
        std::size_t node = 0;
        for (double theta : rule.thetas)
            for (double phi : rule.phis) y[a][node++] = sph_harm(lm[a].first, lm[a].second, theta, phi);
    }
    auto angular_gram = [&](std::size_t a, std::size_t b) {
        std::complex<double> sum = 0.0;
        for (std::size_t i = 0; i < n_nodes; ++i) sum += weights[i] * y[a][i] * std::conj(y[b][i]);
        return sum;
    };

    double worst_full = 0.0;
    for (const BasisSet* basis : {&expo, &poly}) {
        std::vector<std::pair<int, int>> nl;
        for (int n = 0; n <= 5; ++n)
            for (int l = 0; l <= n; ++l) nl.emplace_back(n, l);
        std::vector<std::vector<double>> rint(nl.size(), std::vector<double>(nl.size()));
        for (std::size_t a = 0; a < nl.size(); ++a)
            for (std::size_t b = 0; b <= a; ++b) {
                double v = radial_inner_product(basis->radial(nl[a].first, nl[a].second),
                                                basis->radial(nl[b].first, nl[b].second),
                                                basis->quad_nodes);
                rint[a][b] = rint[b][a] = v;
            }
        for (std::size_t a = 0; a < nl.size(); ++a)
            for (int ma = -nl[a].second; ma <= nl[a].second; ++ma)
                for (std::size_t b = 0; b <= a; ++b)
                    for (int mb = -nl[b].second; mb <= nl[b].second; ++mb) {
                        if (a == b && ma == mb) continue;
                        std::size_t ia = 0, ib = 0;
                        for (std::size_t q = 0; q < lm.size(); ++q) {
                            if (lm[q] == std::make_pair(nl[a].second, ma)) ia = q;
                            if (lm[q] == std::make_pair(nl[b].second, mb)) ib = q;
                        }
                        double v = std::abs(rint[a][b] * angular_gram(ia, ib));
                        worst_full = std::max(worst_full, v);
                    }
    }

    Outcome out;
    out.pass = chain_e < 1e-9 && chain_p < 1e-9 && worst_full < 1e-9 && derive_s < 1.0;
    out.detail = "band 5 same-chain residual " + fmt(chain_e, 3) + " (exponential) / " +
                 fmt(chain_p, 3) + " (truncated sum), full element sweep " + fmt(worst_full, 3) +
                 " (limit 1e-9 each); derivation " + fmt(derive_s, 3) + " s (limit 1 s)";
    return out;
}

// Criterion 2: the hand-recorded coefficient table is audited, not asserted.
// Only its zero row is required to match; every other difference is reported,
// and orthogonality is certified on the derived set.
Outcome reference_table_audit() {
    BasisSet basis = orthogonalize(5, Mode::TruncatedSum);
    std::vector<ReferenceAuditRow> rows = audit_reference_table(basis);
    bool zero_row_ok = true;
    int differing = 0, total = 0;
    ReferenceAuditRow worst;
    for (const ReferenceAuditRow& row : rows) {
        if (row.n == 0 && row.l == 0) {
            if (row.abs_diff != 0.0 || row.derived != 0.0) zero_row_ok = false;
            continue;
        }
        ++total;
        if (row.abs_diff != 0.0) {
            ++differing;
            if (row.abs_diff > worst.abs_diff) worst = row;
        }
    }
    double resid = orthogonality_residual(basis);

    Outcome out;
    out.pass = zero_row_ok && resid < 1e-9;
    out.detail = std::string("zero row matches exactly: ") + (zero_row_ok ? "yes" : "NO") +
                 "; " + std::to_string(differing) + " of " + std::to_string(total) +
                 " recorded coefficients differ from the derived set (largest |diff| " +
                 fmt(worst.abs_diff, 6) + " at n=" + std::to_string(worst.n) + " l=" +
                 std::to_string(worst.l) + " r^" + std::to_string(worst.power) +
                 "; reported, not asserted); derived-set orthogonality residual " +
                 fmt(resid, 3) + " (limit 1e-9)";
    return out;
}

// Criterion 3: harmonic orthonormality on the product rule, and the
// associated Legendre implementation against the derivative-formula oracle.
Outcome harmonic_orthonormality() {
    AngularRule rule = angular_rule(48, 24);
    std::size_t n_nodes = rule.thetas.size() * rule.phis.size();
    std::vector<double> weights(n_nodes);
    {
        std::size_t node = 0;
        for (std::size_t j = 0; j < rule.thetas.size(); ++j)
            for (std::size_t k = 0; k < rule.phis.size(); ++k)
                weights[node++] = rule.theta_weight * rule.phi_weights[k];
    }
    std::vector<std::pair<int, int>> index;
    for (int l = 0; l <= 6; ++l)
        for (int m = -l; m <= l; ++m) index.emplace_back(l, m);
    std::vector<std::vector<std::complex<double>>> values(index.size());
    for (std::size_t a = 0; a < index.size(); ++a) {
        values[a].resize(n_nodes);
        std::size_t node = 0;
        for (double theta : rule.thetas)
            for (double phi : rule.phis)
                values[a][node++] = sph_harm(index[a].first, index[a].second, theta, phi);
    }
    double worst_gram = 0.0;
    for (std::size_t a = 0; a < index.size(); ++a)
        for (std::size_t b = 0; b <= a; ++b) {
            std::complex<double> sum = 0.0;
            for (std::size_t i = 0; i < n_nodes; ++i)
                sum += weights[i] * values[a][i] * std::conj(values[b][i]);
            double target = (a == b) ? 1.0 : 0.0;
            worst_gram = std::max(worst_gram, std::abs(sum - target));
        }

    double worst_assoc = 0.0;
    for (int l = 0; l <= 5; ++l)
        for (int m = 0; m <= l; ++m)
            for (double x : {-0.95, -0.5, -0.2, 0.0, 0.3, 0.77, 0.99}) {
                double mine = assoc_legendre(l, m, x);
                double ref = oracle::assoc_legendre_reference(l, m, x);
                double scale = std::max(1.0, std::abs(ref));
                worst_assoc = std::max(worst_assoc, std::abs(mine - ref) / scale);
            }

    Outcome out;
    out.pass = worst_gram < 1e-8 && worst_assoc < 1e-12;
    out.detail = "orthonormality residual " + fmt(worst_gram, 3) +
                 " for l <= 6 (limit 1e-8); associated Legendre vs derivative oracle " +
                 fmt(worst_assoc, 3) + " for l <= 5 (limit 1e-12)";
    return out;
}

// Criterion 4: band-limited analysis/synthesis converges on a radial
// gaussian: the reconstruction error strictly drops from band 2 to band 5.
Outcome reconstruction_convergence() {
    auto t0 = std::chrono::steady_clock::now();
    BallGrid target = BallGrid::standard();
    for (int i = 0; i < target.n_r; ++i) {
        double r = target.r_center(i);
        double v = std::exp(-(r - 0.55) * (r - 0.55) / (2.0 * 0.15 * 0.15));
        for (int j = 0; j < target.n_theta; ++j)
            for (int k = 0; k < target.n_phi; ++k) target.at(i, j, k) = v;
    }
    std::map<int, double> err;
    for (int band : {2, 5}) {
        BasisSet basis = orthogonalize(band, Mode::Exponential);
        BallGrid rec = reconstruct(forward_moments(target, basis), basis, target);
        err[band] = grid_l2(rec, target);
    }
    double secs = seconds_since(t0);

    Outcome out;
    out.pass = err[5] < err[2] && secs < 10.0;
    out.detail = "radial gaussian rel L2 reconstruction error " + fmt(err[2], 4) +
                 " at band 2 vs " + fmt(err[5], 4) +
                 " at band 5 (strict decrease required); " + fmt(secs, 3) + " s (limit 10 s)";
    return out;
}

// Criterion 5: the closed-form correlation field against the brute-force
// spatial integral on band-limited fixtures with a zonal gaussian kernel.
// The zero-shift degeneracy is asserted; the agreement and oracle-refinement
// clauses are evaluated as stated and the measured numbers are printed.  An
// informational variant using exact truncated translated radial integrals is
// reported alongside to localize where the gap comes from.
Outcome oracle_agreement() {
    BasisSet basis = orthogonalize(3, Mode::Exponential);
    Moments f = random_field_coeffs(basis, 205);

    BallGrid cap(32, 32, 16);
    for (int i = 0; i < cap.n_r; ++i)
        for (int j = 0; j < cap.n_theta; ++j)
            for (int k = 0; k < cap.n_phi; ++k) {
                double r = cap.r_center(i), phi = cap.phi_center(k);
                cap.at(i, j, k) = std::exp(-4.0 * phi * phi) *
                                  std::exp(-6.0 * (r - 0.5) * (r - 0.5));
            }
    Moments g = synthesis_coeffs(forward_moments(cap, basis), basis);
    for (int n = 0; n <= basis.n_max; ++n)
        for (int l = 0; l <= n; ++l) {
            g.at(n, l, 0) = g.at(n, l, 0).real();
            for (int mm = 1; mm <= l; ++mm) {
                g.at(n, l, mm) = 0.0;
                g.at(n, l, -mm) = 0.0;
            }
        }

    BallGrid f_lo = synthesize(f, basis, 24, 24, 12), g_lo = synthesize(g, basis, 24, 24, 12);
    BallGrid f_hi = synthesize(f, basis, 48, 48, 24), g_hi = synthesize(g, basis, 48, 48, 24);

    std::vector<double> alphas, betas;
    for (int j = 0; j < 4; ++j) alphas.push_back(2.0 * pi * (j + 0.5) / 4.0);
    for (int k = 0; k < 4; ++k) betas.push_back(pi * (k + 0.5) / 4.0);

    const std::array<double, 3> shifts = {0.1, 0.2, 0.3};
    std::array<double, 3> err_lo{}, err_hi{}, win_lo{}, win_hi{};
    for (std::size_t s = 0; s < shifts.size(); ++s) {
        double nb_lo = 0.0, nb_hi = 0.0, nw_lo = 0.0, nw_hi = 0.0, d_lo = 0.0, d_hi = 0.0;
        for (double alpha : alphas)
            for (double beta : betas) {
                double mine = blended_conv_reference_at(f, g, basis, shifts[s], alpha, beta);
                double win = windowed_conv_reference_at(f, g, basis, shifts[s], alpha, beta);
                double lo = spatial_conv_oracle_at(f_lo, g_lo, shifts[s], alpha, beta);
                double hi = spatial_conv_oracle_at(f_hi, g_hi, shifts[s], alpha, beta);
                nb_lo += (mine - lo) * (mine - lo);
                nb_hi += (mine - hi) * (mine - hi);
                nw_lo += (win - lo) * (win - lo);
                nw_hi += (win - hi) * (win - hi);
                d_lo += lo * lo;
                d_hi += hi * hi;
            }
        err_lo[s] = std::sqrt(nb_lo / d_lo);
        err_hi[s] = std::sqrt(nb_hi / d_hi);
        win_lo[s] = std::sqrt(nw_lo / d_lo);
        win_hi[s] = std::sqrt(nw_hi / d_hi);
    }

    bool zero_shift_ok = true;
    for (double alpha : alphas)
        for (double beta : betas)
            zero_shift_ok =
                zero_shift_ok && blended_conv_reference_at(f, g, basis, 0.0, alpha, beta) == 0.0;

    bool agree = true, refines = true;
    for (std::size_t s = 0; s < shifts.size(); ++s) {
        agree = agree && err_lo[s] <= 0.1;
        refines = refines && err_hi[s] < err_lo[s];
    }

    Outcome out;
    out.pass = agree && refines && zero_shift_ok;
    out.detail = "rel L2 vs spatial oracle " + fmt(err_lo[0], 3) + "/" + fmt(err_lo[1], 3) +
                 "/" + fmt(err_lo[2], 3) + " at shift 0.1/0.2/0.3 (limit 0.1 each); after " +
                 "oracle resolution doubling " + fmt(err_hi[0], 3) + "/" + fmt(err_hi[1], 3) +
                 "/" + fmt(err_hi[2], 3) + " (decrease required); zero-shift field " +
                 "identically zero: " + (zero_shift_ok ? "yes" : "NO") +
                 "; exact-window variant (informational, not gated) " + fmt(win_lo[0], 3) +
                 "/" + fmt(win_lo[1], 3) + "/" + fmt(win_lo[2], 3) + " refining to " +
                 fmt(win_hi[0], 3) + "/" + fmt(win_hi[1], 3) + "/" + fmt(win_hi[2], 3);
    return out;
}

// Criterion 6: the table-driven closed form for shifted radial inner
// products matches direct quadrature for every chain pair at band 5.
Outcome translation_identity() {
    BasisSet basis = orthogonalize(5, Mode::Exponential);
    double worst = 0.0;
    int pairs = 0, wn = 0, wn2 = 0, wl = 0;
    double wshift = 0.0;
    for (double shift : {0.1, 0.3})
        for (int l = 0; l <= 5; ++l)
            for (int n = basis.chain_start(l); n <= 5; ++n) {
                TranslatedRadial t = translate_radial(basis, n, l, shift);
                for (int n2 = basis.chain_start(l); n2 <= 5; ++n2) {
                    double via_expansion = t.f_coeff * basis.gram_coeff(n, n2, l);
                    for (const auto& [k, w] : t.q_terms)
                        if (k == n2) via_expansion += w * basis.norm2(n2, l);
                    double via_quadrature = shifted_pair_integral(basis, n, n2, l, shift);
                    // Structurally orthogonal pairs integrate to zero, so the
                    // gap is scaled against max(1, |integral|): relative above
                    // unit size, absolute below it.
                    double rel = std::abs(via_expansion - via_quadrature) /
                                 std::max(std::abs(via_quadrature), 1.0);
                    if (rel > worst) {
                        worst = rel;
                        wn = n;
                        wn2 = n2;
                        wl = l;
                        wshift = shift;
                    }
                    ++pairs;
                }
            }

    Outcome out;
    out.pass = worst < 1e-8;
    out.detail = std::to_string(pairs) + " chain pairs at shifts 0.1 and 0.3, worst relative " +
                 "gap " + fmt(worst, 3) + " (limit 1e-8) at n=" + std::to_string(wn) + " n'=" +
                 std::to_string(wn2) + " l=" + std::to_string(wl) + " shift " + fmt(wshift, 2);
    return out;
}

// Criterion 7: rotating the input field about the pole by pi/4 moves the
// correlation argmax one azimuth cell on an 8-point lattice (tolerance 2).
Outcome rotation_equivariance() {
    BasisSet basis = orthogonalize(4, Mode::Exponential);
    Moments f = random_field_coeffs(basis, 701);
    Moments g = random_zonal_coeffs(basis, 702);
    BallGrid shape(3, 8, 4);
    double dtheta = pi / 4.0;
    Moments f_rot(basis.n_max);
    for (int n = 1; n <= basis.n_max; ++n)
        for (int l = 0; l <= n; ++l)
            for (int mm = -l; mm <= l; ++mm) {
                std::complex<double> phase(std::cos(mm * dtheta), -std::sin(mm * dtheta));
                f_rot.at(n, l, mm) = phase * f.at(n, l, mm);
            }
    BallGrid base = blended_conv(f, g, basis, shape);
    BallGrid rot = blended_conv(f_rot, g, basis, shape);

    auto argmax_alpha = [](const BallGrid& field) {
        int best = 0;
        double top = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < field.n_r; ++i)
            for (int j = 0; j < field.n_theta; ++j)
                for (int k = 0; k < field.n_phi; ++k)
                    if (field.at(i, j, k) > top) {
                        top = field.at(i, j, k);
                        best = j;
                    }
        return best;
    };
    int j0 = argmax_alpha(base);
    int j1 = argmax_alpha(rot);
    int expected = (j0 + 1) % 8;
    int forward = (j1 - expected + 8) % 8;
    int dist = std::min(forward, 8 - forward);

    Outcome out;
    out.pass = dist <= 2;
    out.detail = "pi/4 input rotation moved the argmax from azimuth cell " + std::to_string(j0) +
                 " to " + std::to_string(j1) + " (expected cell " + std::to_string(expected) +
                 ", off by " + std::to_string(dist) + ", tolerance 2)";
    return out;
}

// Criterion 8: the hand-written reverse mode against central differences at
// step 1e-5 across every trainable block on a 3-class 12-sample batch.
Outcome gradient_check() {
    auto t0 = std::chrono::steady_clock::now();
    BasisSet basis = orthogonalize(3, Mode::Exponential);
    BallGrid lattice(3, 4, 2);
    LearnContext ctx = make_learn_context(basis, lattice);
    NetworkParams p = init_params(basis, lattice, 3, 15);

    Dataset d = make_synthetic_dataset(4, 0.05, 3);
    std::vector<BallGrid> grids = bin_dataset(d, 8, 10, 6);
    std::vector<PreparedSample> samples = prepare_dataset(grids, d.labels, basis);

    double loss0 = 0.0;
    ParamGradients g = gradient(p, samples, ctx, {}, &loss0);
    auto pblocks = all_blocks(p);
    auto gblocks = all_blocks(g);

    std::mt19937_64 rng(2027);
    double worst = 0.0;
    std::size_t worst_block = 0;
    int probes = 0;
    for (std::size_t b = 0; b < pblocks.size(); ++b) {
        std::vector<double>& pv = *pblocks[b];
        std::vector<double>& gv = *gblocks[b];
        int per_block = (pv.size() > 200) ? 4 : 2;
        std::uniform_int_distribution<std::size_t> pick(0, pv.size() - 1);
        for (int rep = 0; rep < per_block; ++rep) {
            std::size_t idx = pick(rng);
            double h = 1e-5 * std::max(1.0, std::abs(pv[idx]));
            double saved = pv[idx];
            pv[idx] = saved + h;
            double lp = batch_loss(p, samples, ctx);
            pv[idx] = saved - h;
            double lm = batch_loss(p, samples, ctx);
            pv[idx] = saved;
            double fd = (lp - lm) / (2.0 * h);
            double denom = std::max({std::abs(fd), std::abs(gv[idx]), 1e-8});
            double rel = std::abs(fd - gv[idx]) / denom;
            if (rel > worst) {
                worst = rel;
                worst_block = b;
            }
            ++probes;
        }
    }
    double secs = seconds_since(t0);

    Outcome out;
    out.pass = worst < 1e-3 && std::isfinite(loss0) && secs < 60.0;
    out.detail = std::to_string(probes) + " probes across " + std::to_string(pblocks.size()) +
                 " parameter blocks at step 1e-5, worst relative gap " + fmt(worst, 3) +
                 " (limit 1e-3, block " + std::to_string(worst_block) + "); 3-class 12-sample " +
                 "batch; " + fmt(secs, 3) + " s (limit 60 s)";
    return out;
}

// Shared fixture for the two training criteria.  Scale knobs are calibration
// values; the thresholds they must clear are fixed.
struct ClassificationRun {
    double test_accuracy = 0.0;
    double train_seconds = 0.0;
    bool diverged = false;
};

TrainConfig classification_config(unsigned long long seed, ConvKind conv, int iters_polynomial) {
    TrainConfig cfg;
    cfg.grid_r = 12;
    cfg.grid_theta = 16;
    cfg.grid_phi = 8;
    cfg.lat_r = 4;
    cfg.lat_theta = 6;
    cfg.lat_phi = 3;
    cfg.batch_size = 16;
    cfg.iters_polynomial = iters_polynomial;
    cfg.iters_kernel = 600;
    cfg.seed = seed;
    cfg.conv = conv;
    return cfg;
}

ClassificationRun run_classification(unsigned long long seed, ConvKind conv,
                                     int iters_polynomial) {
    BasisSet basis = orthogonalize(3, Mode::Exponential);
    Dataset train_ds = make_synthetic_dataset(100, 0.01, 42);
    Dataset test_ds = make_synthetic_dataset(30, 0.01, 42 + 1000003);
    TrainConfig cfg = classification_config(seed, conv, iters_polynomial);

    auto t0 = std::chrono::steady_clock::now();
    TrainResult tr = train(train_ds, cfg, basis);
    LearnContext ctx = make_learn_context(basis, BallGrid(cfg.lat_r, cfg.lat_theta, cfg.lat_phi));
    std::vector<PreparedSample> test_samples = prepare_dataset(
        bin_dataset(test_ds, cfg.grid_r, cfg.grid_theta, cfg.grid_phi), test_ds.labels, basis);
    ClassificationRun out;
    out.test_accuracy = accuracy(tr.params, test_samples, ctx);
    out.train_seconds = seconds_since(t0);
    out.diverged = tr.diverged;
    return out;
}

// Criterion 9: 3 classes, 100 train / 30 test each, two-phase schedule on
// one core, test accuracy at least 90% inside ten minutes; the rotation-only
// ablation must land strictly lower.
Outcome classification_fixture() {
    ClassificationRun full = run_classification(42, ConvKind::Blended, 60);
    ClassificationRun ablated = run_classification(42, ConvKind::RotationOnly, 60);

    Outcome out;
    out.pass = !full.diverged && full.test_accuracy >= 0.90 && full.train_seconds < 600.0 &&
               ablated.test_accuracy < full.test_accuracy;
    out.detail = "test accuracy " + fmt(full.test_accuracy, 4) + " (threshold 0.90) in " +
                 fmt(full.train_seconds, 4) + " s single core (limit 600 s); rotation-only " +
                 "ablation " + fmt(ablated.test_accuracy, 4) + " (must be strictly lower)" +
                 (full.diverged || ablated.diverged ? "; DIVERGED" : "");
    return out;
}

// Criterion 10: freezing the projection at its analytic initialization can
// not beat training it, median test accuracy over three seeds.
Outcome projection_ablation() {
    std::vector<double> trained, frozen;
    for (unsigned long long seed : {1ULL, 2ULL, 3ULL}) {
        trained.push_back(run_classification(seed, ConvKind::Blended, 60).test_accuracy);
        frozen.push_back(run_classification(seed, ConvKind::Blended, 0).test_accuracy);
    }
    auto median3 = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[1];
    };
    double med_t = median3(trained), med_f = median3(frozen);

    Outcome out;
    out.pass = med_f <= med_t;
    out.detail = "frozen-projection test accuracy " + fmt(frozen[0], 3) + "/" + fmt(frozen[1], 3) +
                 "/" + fmt(frozen[2], 3) + " (median " + fmt(med_f, 4) + ") vs trained " +
                 fmt(trained[0], 3) + "/" + fmt(trained[1], 3) + "/" + fmt(trained[2], 3) +
                 " (median " + fmt(med_t, 4) + "); frozen median must not exceed trained";
    return out;
}

// Criterion 11: the closed-form operation count equals an instrumented run
// exactly, and the sweep CSV shows per-query cost independent of how many
// points the input cloud had.
Outcome cost_model() {
    BasisSet basis = orthogonalize(5, Mode::Exponential);
    Moments f = random_field_coeffs(basis, 1101);
    Moments g = random_zonal_coeffs(basis, 1102);
    std::vector<std::array<double, 3>> queries = {
        {0.1, 0.3, 0.9}, {0.25, 2.2, 1.4}, {0.4, 5.0, 0.3}, {0.15, 1.0, 2.0}};
    OpCounts measured;
    {
        CountingScope scope;
        for (const auto& q : queries) blended_conv_reference_at(f, g, basis, q[0], q[1], q[2]);
        measured = scope.counts();
    }
    OpCounts predicted = conv_flop_count(5, queries.size());
    bool exact = measured.multiplies == predicted.multiplies &&
                 measured.adds == predicted.adds &&
                 measured.transcendentals == predicted.transcendentals;

    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() /
                   ("acceptance-bench-" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
    {
        std::ofstream cfg(dir / "config.json");
        cfg << "{\n \"seed\": 1,\n \"bench\": {\"band_limits\": [2, 3], "
               "\"lattices\": [[3, 3, 3]], \"points\": [400, 4000]}\n}\n";
    }
    std::string cmd = std::string(BALLSPEC_CLI_PATH) + " --config " +
                      (dir / "config.json").string() + " --out " + (dir / "out").string() +
                      " bench > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    bool ran = rc == 0;

    bool independent = ran;
    int groups = 0;
    if (ran) {
        std::ifstream csv(dir / "out" / "bench.csv");
        std::string line;
        std::getline(csv, line);
        std::map<std::string, std::vector<std::array<std::string, 4>>> by_setting;
        while (std::getline(csv, line)) {
            std::vector<std::string> cells;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) cells.push_back(cell);
            if (cells.size() < 7) continue;
            by_setting[cells[0] + "|" + cells[1]].push_back(
                {cells[2], cells[3], cells[4], cells[5]});
        }
        groups = static_cast<int>(by_setting.size());
        independent = !by_setting.empty();
        for (const auto& [key, rows] : by_setting) {
            bool two_sizes = false;
            for (const auto& row : rows) {
                two_sizes = two_sizes || row[0] != rows.front()[0];
                independent = independent && row[1] == rows.front()[1] &&
                              row[2] == rows.front()[2] && row[3] == rows.front()[3];
            }
            independent = independent && two_sizes;
        }
    }
    fs::remove_all(dir);

    Outcome out;
    out.pass = exact && ran && independent;
    out.detail = std::string("instrumented run equals the closed form ") +
                 (exact ? "exactly" : "MISMATCH") + " (band 5, 4 queries: " +
                 std::to_string(predicted.multiplies) + " mul, " +
                 std::to_string(predicted.adds) + " add, " +
                 std::to_string(predicted.transcendentals) + " transcendental); sweep CSV " +
                 (ran ? "" : "FAILED TO RUN; ") + std::to_string(groups) +
                 " (band, lattice) groups each keep identical counts across 400 and 4000 " +
                 "point clouds: " + (independent ? "yes" : "NO");
    return out;
}

// Criterion 12: descriptors from a trained network.  Self-retrieval is
// vacuously perfect, a lightly jittered copy of each gallery item comes back
// as its own nearest neighbor, and all four similarity measures run.
Outcome retrieval_fixture() {
    BasisSet basis = orthogonalize(3, Mode::Exponential);
    Dataset train_ds = make_synthetic_dataset(6, 0.01, 71);
    TrainConfig cfg;
    cfg.grid_r = 8;
    cfg.grid_theta = 10;
    cfg.grid_phi = 6;
    cfg.lat_r = 3;
    cfg.lat_theta = 4;
    cfg.lat_phi = 2;
    cfg.batch_size = 6;
    cfg.iters_polynomial = 20;
    cfg.iters_kernel = 200;
    cfg.seed = 7;
    TrainResult tr = train(train_ds, cfg, basis);

    Dataset gallery_ds = make_synthetic_dataset(10, 0.01, 4242);
    std::vector<BallGrid> grids =
        bin_dataset(gallery_ds, cfg.grid_r, cfg.grid_theta, cfg.grid_phi);
    DescriptorReducer reducer(1000);
    reducer.fit(concat_features_batch(tr.params, grids, basis));

    std::vector<Descriptor> gallery;
    std::vector<int> identity;
    for (std::size_t i = 0; i < grids.size(); ++i) {
        gallery.push_back(
            descriptor(tr.params, grids[i], basis, reducer, "item-" + std::to_string(i)));
        identity.push_back(static_cast<int>(i));
    }

    std::vector<Descriptor> self_queries = gallery;
    for (std::size_t i = 0; i < self_queries.size(); ++i)
        self_queries[i].id = "query-" + std::to_string(i);
    RetrievalMetrics self =
        evaluate(self_queries, identity, gallery, identity, Similarity::Cosine);

    std::vector<Descriptor> jittered;
    for (std::size_t i = 0; i < gallery_ds.clouds.size(); ++i) {
        PointCloud copy = gallery_ds.clouds[i];
        std::mt19937_64 rng(500 + i);
        std::normal_distribution<double> noise(0.0, 0.01);
        for (auto& pt : copy.points)
            for (int c = 0; c < 3; ++c) pt[c] += noise(rng);
        BallGrid jg = bin_cloud(normalize_cloud(copy), cfg.grid_r, cfg.grid_theta, cfg.grid_phi);
        jittered.push_back(
            descriptor(tr.params, jg, basis, reducer, "jitter-" + std::to_string(i)));
    }
    RetrievalMetrics jit = evaluate(jittered, identity, gallery, identity, Similarity::Cosine);

    std::string sweep;
    bool all_finite = true;
    for (Similarity kind : all_similarities()) {
        RetrievalMetrics m = evaluate(gallery, gallery_ds.labels, kind);
        all_finite = all_finite && std::isfinite(m.nn_accuracy) &&
                     std::isfinite(m.mean_average_precision);
        if (!sweep.empty()) sweep += ", ";
        sweep += std::string(similarity_name(kind)) + " nn " + fmt(m.nn_accuracy, 3) + " map " +
                 fmt(m.mean_average_precision, 3);
    }

    Outcome out;
    out.pass = self.mean_average_precision == 1.0 && jit.nn_accuracy >= 0.90 && all_finite &&
               !tr.diverged;
    out.detail = "self-retrieval map " + fmt(self.mean_average_precision, 4) +
                 " (must equal 1) with nn " + fmt(self.nn_accuracy, 3) + "; jittered copies nn " +
                 fmt(jit.nn_accuracy, 4) + " under cosine (threshold 0.90, 30 items); " +
                 "class retrieval by measure: " + sweep;
    return out;
}

struct Criterion {
    int number;
    Outcome (*run)();
};

const std::array<Criterion, 12> kCriteria = {{
    {1, basis_orthogonality},
    {2, reference_table_audit},
    {3, harmonic_orthonormality},
    {4, reconstruction_convergence},
    {5, oracle_agreement},
    {6, translation_identity},
    {7, rotation_equivariance},
    {8, gradient_check},
    {9, classification_fixture},
    {10, projection_ablation},
    {11, cost_model},
    {12, retrieval_fixture},
}};

}  // namespace

int main(int argc, char** argv) {
    int selected = 0;
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg == "--criterion" && i + 1 < argc) {
            selected = std::atoi(argv[++i]);
            if (selected < 1 || selected > 12) {
                std::cerr << "criterion number must be 1..12\n";
                return 1;
            }
        } else {
            std::cerr << "usage: acceptance [--criterion N]\n";
            return 1;
        }
    }

    bool all_pass = true;
    for (const Criterion& c : kCriteria) {
        if (selected != 0 && c.number != selected) continue;
        Outcome result;
        try {
            result = c.run();
        } catch (const std::exception& e) {
            result.pass = false;
            result.detail = std::string("unhandled error: ") + e.what();
        }
        std::cout << (result.pass ? "[PASS]" : "[FAIL]") << " criterion " << c.number << ": "
                  << result.detail << std::endl;
        all_pass = all_pass && result.pass;
    }
    return all_pass ? 0 : 1;
}
