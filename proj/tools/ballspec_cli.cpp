#include <CLI11.hpp>

#include <glob.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ballspec/basis.hpp"
#include "ballspec/basis_report.hpp"
#include "ballspec/convolution.hpp"
#include "ballspec/errors.hpp"
#include "ballspec/grid.hpp"
#include "ballspec/learn.hpp"
#include "ballspec/pointcloud.hpp"
#include "ballspec/retrieval.hpp"
#include "ballspec/runconfig.hpp"
#include "ballspec/serialization.hpp"
#include "ballspec/transform.hpp"

namespace fs = std::filesystem;
using namespace ballspec;

namespace {

std::string real_str(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

std::string dims_str(int a, int b, int c) {
    return std::to_string(a) + "x" + std::to_string(b) + "x" + std::to_string(c);
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw input_error("cannot open '" + path.string() + "' for writing");
    out << content;
    if (!out) throw input_error("failed while writing '" + path.string() + "'");
}

fs::path prepare_out_dir(const RunConfig& cfg) {
    fs::path dir(cfg.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw input_error("cannot create output directory '" + cfg.out + "': " + ec.message());
    return dir;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

// Dataset assembly: parametric shapes, or files matched by a glob pattern
// whose parent directories name the classes.
Dataset build_dataset(const RunConfig& cfg) {
    if (cfg.dataset.kind == DatasetSpec::Kind::Synthetic)
        return make_synthetic_dataset(cfg.dataset.per_class, cfg.dataset.jitter, cfg.seed);

    glob_t matches{};
    int rc = glob(cfg.dataset.glob.c_str(), 0, nullptr, &matches);
    if (rc == GLOB_NOMATCH) {
        globfree(&matches);
        throw input_error("dataset glob '" + cfg.dataset.glob + "' matched no files");
    }
    if (rc != 0) {
        globfree(&matches);
        throw input_error("dataset glob '" + cfg.dataset.glob + "' failed");
    }
    std::vector<std::string> paths(matches.gl_pathv, matches.gl_pathv + matches.gl_pathc);
    globfree(&matches);
    std::sort(paths.begin(), paths.end());

    std::map<std::string, int> class_ids;
    for (const std::string& p : paths)
        class_ids.emplace(fs::path(p).parent_path().filename().string(), 0);
    int next = 0;
    for (auto& [name, id] : class_ids) id = next++;
    if (class_ids.size() < 2)
        throw input_error("file dataset needs at least two class directories, found " +
                          std::to_string(class_ids.size()));

    Dataset ds;
    ds.classes = next;
    for (const std::string& p : paths) {
        ds.clouds.push_back(load_cloud(p));
        ds.labels.push_back(class_ids[fs::path(p).parent_path().filename().string()]);
    }
    return ds;
}

// Zonal Gaussian cap sampled on a grid and carried to the spectral domain.
Moments gaussian_kernel_moments(const BasisSet& basis, int n_r, int n_theta, int n_phi,
                                const KernelSpec& spec) {
    BallGrid g(n_r, n_theta, n_phi);
    for (int i = 0; i < n_r; ++i)
        for (int j = 0; j < n_theta; ++j)
            for (int k = 0; k < n_phi; ++k) {
                double r = g.r_center(i), phi = g.phi_center(k);
                double dr = r - spec.r0;
                g.at(i, j, k) =
                    std::exp(-spec.kappa_phi * phi * phi) * std::exp(-spec.kappa_r * dr * dr);
            }
    return forward_moments(g, basis);
}

BasisSet obtain_basis(const RunConfig& cfg, const std::string& basis_path,
                      std::string& source_note) {
    if (!basis_path.empty()) {
        source_note = "loaded from " + basis_path;
        return load_basis(basis_path);
    }
    source_note = "derived in-process (n_max " + std::to_string(cfg.n_max) + ", " +
                  mode_name(cfg.mode) + ")";
    return orthogonalize(cfg.n_max, cfg.mode, cfg.quad_nodes);
}

int cmd_derive_basis(const RunConfig& cfg) {
    fs::path out = prepare_out_dir(cfg);
    auto t0 = std::chrono::steady_clock::now();
    BasisSet basis = orthogonalize(cfg.n_max, cfg.mode, cfg.quad_nodes);
    double derive_ms = elapsed_ms(t0);
    save_basis((out / "basis.json").string(), basis);
    double residual = orthogonality_residual(basis);

    std::ostringstream rep;
    rep << "basis derivation report\n"
        << "n_max: " << cfg.n_max << "\n"
        << "mode: " << mode_name(cfg.mode) << "\n"
        << "quad_nodes: " << cfg.quad_nodes << "\n"
        << "derivation wall ms: " << real_str(derive_ms) << "\n"
        << "max off-diagonal |<Q_nl, Q_n'l>|: " << real_str(residual) << "\n";

    if (cfg.mode == Mode::TruncatedSum) {
        std::vector<ReferenceAuditRow> rows = audit_reference_table(basis);
        std::size_t differing = 0;
        ReferenceAuditRow worst;
        for (const ReferenceAuditRow& r : rows)
            if (r.abs_diff > 0.0) {
                ++differing;
                if (r.abs_diff > worst.abs_diff) worst = r;
            }
        rep << "reference table audit: " << rows.size() << " coefficients, " << differing
            << " differ from the derivation\n";
        if (differing > 0)
            rep << "largest difference: " << real_str(worst.abs_diff) << " at Q_" << worst.n
                << worst.l << " x^" << worst.power << "\n";
        rep << "per-coefficient rows: basis_audit.csv\n"
            << "note: differences are reported, not asserted; orthogonality above is the\n"
            << "authoritative check and applies to the derived set\n";

        std::ofstream csv(out / "basis_audit.csv");
        if (!csv) throw input_error("cannot open basis_audit.csv for writing");
        csv << "n,l,power,reference,derived,abs_diff\n" << std::setprecision(17);
        for (const ReferenceAuditRow& r : rows)
            csv << r.n << ',' << r.l << ',' << r.power << ',' << r.reference << ','
                << r.derived << ',' << r.abs_diff << '\n';
    } else {
        rep << "reference table audit: not applicable (the table is polynomial; rerun with "
               "--mode truncated-sum)\n";
    }
    write_text(out / "basis_report.txt", rep.str());
    std::cout << rep.str();
    std::cout << "wrote " << (out / "basis.json").string() << "\n";
    return 0;
}

int cmd_bin(const RunConfig& cfg, const std::string& input) {
    fs::path out = prepare_out_dir(cfg);
    PointCloud cloud = load_cloud(input);
    PointCloud normalized = normalize_cloud(cloud);
    std::vector<int> counts;
    BallGrid grid = bin_cloud(normalized, cfg.grid[0], cfg.grid[1], cfg.grid[2], &counts);
    save_grid((out / "grid.json").string(), grid, &counts);

    long long occupancy = 0;
    std::size_t occupied = 0;
    for (int c : counts) {
        occupancy += c;
        if (c > 0) ++occupied;
    }
    std::ostringstream rep;
    rep << "binning report\n"
        << "input: " << input << "\n"
        << "points: " << cloud.size() << "\n"
        << "grid: " << dims_str(cfg.grid[0], cfg.grid[1], cfg.grid[2]) << " ("
        << grid.cell_count() << " cells)\n"
        << "occupied cells: " << occupied << "\n"
        << "occupancy sum: " << occupancy << "\n";
    write_text(out / "bin_report.txt", rep.str());
    std::ofstream csv(out / "bin_report.csv");
    if (!csv) throw input_error("cannot open bin_report.csv for writing");
    csv << "points,cells,occupied_cells,occupancy_sum\n"
        << cloud.size() << ',' << grid.cell_count() << ',' << occupied << ',' << occupancy
        << '\n';
    std::cout << rep.str() << "wrote " << (out / "grid.json").string() << "\n";
    return 0;
}

int cmd_transform(const RunConfig& cfg, const std::string& input, const std::string& basis_path) {
    fs::path out = prepare_out_dir(cfg);
    std::string basis_note;
    BasisSet basis = obtain_basis(cfg, basis_path, basis_note);
    BallGrid grid = load_grid(input).grid;
    Moments m = forward_moments(grid, basis);
    save_moments((out / "moments.json").string(), m);

    double max_abs = 0.0;
    for (const auto& z : m.values) max_abs = std::max(max_abs, std::abs(z));
    BallGrid recon = reconstruct(m, basis, grid);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
        double d = recon.values[i] - grid.values[i];
        num += d * d;
        den += grid.values[i] * grid.values[i];
    }
    double rel = den > 0.0 ? std::sqrt(num / den) : 0.0;

    std::ostringstream rep;
    rep << "spectral analysis report\n"
        << "input: " << input << "\n"
        << "basis: " << basis_note << "\n"
        << "coefficients: " << m.values.size() << " (n_max " << m.n_max << ")\n"
        << "max |moment|: " << real_str(max_abs) << "\n"
        << "band-limited reconstruction relative L2: " << real_str(rel) << "\n";
    write_text(out / "transform_report.txt", rep.str());
    std::ofstream csv(out / "transform_report.csv");
    if (!csv) throw input_error("cannot open transform_report.csv for writing");
    csv << "n_max,coefficients,max_abs,recon_rel_l2\n"
        << std::setprecision(17) << m.n_max << ',' << m.values.size() << ',' << max_abs << ','
        << rel << '\n';
    std::cout << rep.str() << "wrote " << (out / "moments.json").string() << "\n";
    return 0;
}

int cmd_convolve(const RunConfig& cfg, const std::string& input, const std::string& basis_path,
                 const std::string& kernel_path, bool rotation_only) {
    fs::path out = prepare_out_dir(cfg);
    std::string basis_note;
    BasisSet basis = obtain_basis(cfg, basis_path, basis_note);
    ConvKind kind = rotation_only ? ConvKind::RotationOnly : cfg.conv;
    if (kind == ConvKind::Blended && basis.mode != Mode::Exponential)
        throw input_error("blended convolution requires the exponential mode");

    BallGrid shape = load_grid(input).grid;
    Moments f = forward_moments(shape, basis);
    Moments g;
    std::string kernel_note;
    if (!kernel_path.empty()) {
        KernelSpectrum k = load_kernel(kernel_path);
        if (k.n_max != basis.n_max)
            throw input_error("kernel band limit " + std::to_string(k.n_max) +
                              " does not match the basis band limit " +
                              std::to_string(basis.n_max));
        g = k.to_moments();
        kernel_note = "spectrum from " + kernel_path;
    } else {
        g = gaussian_kernel_moments(basis, shape.n_r, shape.n_theta, shape.n_phi, cfg.kernel);
        kernel_note = "zonal Gaussian cap (kappa_phi " + real_str(cfg.kernel.kappa_phi) +
                      ", kappa_r " + real_str(cfg.kernel.kappa_r) + ", r0 " +
                      real_str(cfg.kernel.r0) + ")";
    }

    BallGrid lattice(cfg.lattice[0], cfg.lattice[1], cfg.lattice[2]);
    BallGrid field = (kind == ConvKind::RotationOnly)
                         ? rotation_only_conv(f, g, basis, lattice)
                         : blended_conv(f, g, basis, lattice);
    save_field((out / "field.json").string(), field);

    double max_abs = 0.0;
    int ai = 0, aj = 0, ak = 0;
    for (int i = 0; i < field.n_r; ++i)
        for (int j = 0; j < field.n_theta; ++j)
            for (int k = 0; k < field.n_phi; ++k)
                if (std::abs(field.at(i, j, k)) > max_abs) {
                    max_abs = std::abs(field.at(i, j, k));
                    ai = i;
                    aj = j;
                    ak = k;
                }
    OpCounts cost = conv_flop_count(basis.n_max, field.cell_count());

    std::ostringstream rep;
    rep << "correlation field report\n"
        << "input: " << input << "\n"
        << "basis: " << basis_note << "\n"
        << "kernel: " << kernel_note << "\n"
        << "kind: " << conv_kind_name(kind) << "\n"
        << "lattice: " << dims_str(field.n_r, field.n_theta, field.n_phi) << "\n"
        << "max |field|: " << real_str(max_abs) << " at shift " << real_str(field.r_center(ai))
        << ", azimuth " << real_str(field.theta_center(aj)) << ", polar "
        << real_str(field.phi_center(ak)) << "\n"
        << "spectral query cost: " << cost.multiplies << " multiplies, " << cost.adds
        << " adds, " << cost.transcendentals << " transcendentals\n";
    write_text(out / "convolve_report.txt", rep.str());
    std::ofstream csv(out / "convolve_report.csv");
    if (!csv) throw input_error("cannot open convolve_report.csv for writing");
    csv << "kind,lattice_cells,max_abs,argmax_shift,argmax_azimuth,argmax_polar,multiplies,"
           "adds,transcendentals\n"
        << std::setprecision(17) << conv_kind_name(kind) << ',' << field.cell_count() << ','
        << max_abs << ',' << field.r_center(ai) << ',' << field.theta_center(aj) << ','
        << field.phi_center(ak) << ',' << cost.multiplies << ',' << cost.adds << ','
        << cost.transcendentals << '\n';
    std::cout << rep.str() << "wrote " << (out / "field.json").string() << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    fs::path out = prepare_out_dir(cfg);
    Dataset ds = build_dataset(cfg);
    BasisSet basis = orthogonalize(cfg.n_max, cfg.mode, cfg.quad_nodes);
    TrainConfig tcfg = cfg.to_train_config();
    auto t0 = std::chrono::steady_clock::now();
    TrainResult result = train(ds, tcfg, basis);
    double wall_ms = elapsed_ms(t0);

    save_network((out / "checkpoint.json").string(), result.params, cfg.mode, cfg.quad_nodes);
    std::ofstream hist(out / "history.csv");
    if (!hist) throw input_error("cannot open history.csv for writing");
    hist << "step,phase,loss\n" << std::setprecision(17);
    for (const HistoryRow& row : result.history)
        hist << row.step << ',' << row.phase << ',' << row.loss << '\n';

    LearnContext ctx = make_learn_context(basis, result.params.lattice_shape());
    std::vector<PreparedSample> train_samples = prepare_dataset(
        bin_dataset(ds, tcfg.grid_r, tcfg.grid_theta, tcfg.grid_phi), ds.labels, basis);
    double train_acc = accuracy(result.params, train_samples, ctx);

    double test_acc = -1.0;
    if (cfg.eval_per_class > 0) {
        Dataset eval =
            make_synthetic_dataset(cfg.eval_per_class, cfg.dataset.jitter, cfg.seed + 1000003);
        std::vector<PreparedSample> eval_samples = prepare_dataset(
            bin_dataset(eval, tcfg.grid_r, tcfg.grid_theta, tcfg.grid_phi), eval.labels, basis);
        test_acc = accuracy(result.params, eval_samples, ctx);
    }

    std::ostringstream rep;
    rep << "training report\n"
        << "samples: " << ds.clouds.size() << " across " << ds.classes << " classes\n"
        << "grid: " << dims_str(tcfg.grid_r, tcfg.grid_theta, tcfg.grid_phi) << ", lattice: "
        << dims_str(tcfg.lat_r, tcfg.lat_theta, tcfg.lat_phi) << "\n"
        << "kernels: " << conv_kind_name(tcfg.conv) << "\n"
        << "schedule: " << tcfg.iters_polynomial << " projection steps at lr "
        << real_str(tcfg.lr_polynomial) << ", then " << tcfg.iters_kernel
        << " kernel steps at lr " << real_str(tcfg.lr_kernel) << "\n"
        << "seed: " << cfg.seed << ", threads: " << cfg.threads << "\n"
        << "final loss: "
        << (result.history.empty() ? "n/a" : real_str(result.history.back().loss)) << "\n"
        << "train accuracy: " << real_str(train_acc) << "\n";
    if (test_acc >= 0.0)
        rep << "held-out accuracy (" << cfg.eval_per_class << " per class): "
            << real_str(test_acc) << "\n";
    rep << "wall ms: " << real_str(wall_ms) << "\n";
    if (result.diverged) rep << "training DIVERGED; checkpoint holds the last finite state\n";
    write_text(out / "train_report.txt", rep.str());

    std::ofstream csv(out / "train_report.csv");
    if (!csv) throw input_error("cannot open train_report.csv for writing");
    csv << "samples,classes,iters_polynomial,iters_kernel,final_loss,train_accuracy,"
           "test_accuracy,diverged\n"
        << std::setprecision(17) << ds.clouds.size() << ',' << ds.classes << ','
        << tcfg.iters_polynomial << ',' << tcfg.iters_kernel << ','
        << (result.history.empty() ? 0.0 : result.history.back().loss) << ',' << train_acc
        << ',' << test_acc << ',' << (result.diverged ? 1 : 0) << '\n';

    std::cout << rep.str() << "wrote " << (out / "checkpoint.json").string() << "\n";
    if (result.diverged) {
        std::cerr << "error: training diverged\n";
        return 2;
    }
    return 0;
}

int cmd_retrieve(const RunConfig& cfg, const std::vector<std::string>& query_paths) {
    fs::path out = prepare_out_dir(cfg);
    std::string ck_path = cfg.checkpoint.empty() ? (out / "checkpoint.json").string()
                                                 : cfg.checkpoint;
    NetworkDocument ck = load_network(ck_path);
    BasisSet basis = orthogonalize(ck.params.n_max, ck.mode, ck.quad_nodes);

    Dataset ds = build_dataset(cfg);
    std::vector<BallGrid> grids = bin_dataset(ds, cfg.grid[0], cfg.grid[1], cfg.grid[2]);
    std::vector<std::vector<double>> feats = concat_features_batch(ck.params, grids, basis);

    DescriptorReducer reducer(cfg.descriptor_dim);
    reducer.fit(feats);
    save_reducer((out / "reducer.json").string(), reducer);

    std::vector<Descriptor> gallery;
    gallery.reserve(feats.size());
    for (std::size_t i = 0; i < feats.size(); ++i) {
        Descriptor d;
        d.values = reducer.apply(feats[i]);
        d.id = "item-" + std::to_string(i);
        gallery.push_back(std::move(d));
    }
    save_gallery((out / "gallery.json").string(), gallery, ds.labels);

    std::ostringstream rep;
    rep << "retrieval report\n"
        << "checkpoint: " << ck_path << "\n"
        << "gallery: " << gallery.size() << " shapes across " << ds.classes << " classes\n"
        << "descriptor dimension: " << cfg.descriptor_dim << " ("
        << (reducer.identity() ? "identity with zero padding" : "principal components")
        << ")\n";

    std::ofstream csv(out / "retrieval.csv");
    if (!csv) throw input_error("cannot open retrieval.csv for writing");
    csv << "metric,nn_accuracy,map\n" << std::setprecision(17);
    rep << "leave-one-out evaluation over the gallery:\n";
    for (Similarity s : all_similarities()) {
        RetrievalMetrics m = evaluate(gallery, ds.labels, s);
        rep << "  " << similarity_name(s) << ": nearest-neighbor accuracy "
            << real_str(m.nn_accuracy) << ", mAP " << real_str(m.mean_average_precision)
            << "\n";
        csv << similarity_name(s) << ',' << m.nn_accuracy << ',' << m.mean_average_precision
            << '\n';
    }

    {
        std::vector<Descriptor> queries = gallery;
        std::vector<int> identity(gallery.size());
        for (std::size_t i = 0; i < identity.size(); ++i) {
            queries[i].id = "query-" + std::to_string(i);
            identity[i] = static_cast<int>(i);
        }
        RetrievalMetrics m = evaluate(queries, identity, gallery, identity, Similarity::Cosine);
        rep << "self-retrieval check (cosine, labels = identity): mAP "
            << real_str(m.mean_average_precision) << ", nearest-neighbor accuracy "
            << real_str(m.nn_accuracy) << "\n";
    }

    for (const std::string& qp : query_paths) {
        PointCloud cloud = load_cloud(qp);
        BallGrid grid =
            bin_cloud(normalize_cloud(cloud), cfg.grid[0], cfg.grid[1], cfg.grid[2]);
        Descriptor q = descriptor(ck.params, grid, basis, reducer, qp);
        std::vector<RankedMatch> ranked = rank(q, gallery, cfg.metric);
        rep << "query " << qp << " (" << similarity_name(cfg.metric) << "):\n";
        for (std::size_t k = 0; k < ranked.size() && k < 5; ++k)
            rep << "  " << (k + 1) << ". " << gallery[ranked[k].index].id << " (label "
                << ds.labels[ranked[k].index] << ", score " << real_str(ranked[k].score)
                << ")\n";
    }

    write_text(out / "retrieval_report.txt", rep.str());
    std::cout << rep.str() << "wrote " << (out / "gallery.json").string() << "\n";
    return 0;
}

int cmd_bench(const RunConfig& cfg) {
    fs::path out = prepare_out_dir(cfg);
    std::ofstream csv(out / "bench.csv");
    if (!csv) throw input_error("cannot open bench.csv for writing");
    csv << "n_max,lattice,points,multiplies,adds,transcendentals,wall_ns\n";

    std::size_t rows = 0;
    for (int band : cfg.bench.band_limits) {
        BasisSet basis = orthogonalize(band, Mode::Exponential, cfg.quad_nodes);
        Moments g = gaussian_kernel_moments(basis, cfg.grid[0], cfg.grid[1], cfg.grid[2],
                                            cfg.kernel);
        for (int n_points : cfg.bench.points) {
            // Uniform ball sample kept inside the binning domain.
            std::mt19937_64 rng(cfg.seed + static_cast<unsigned long long>(n_points) * 7919 +
                                static_cast<unsigned long long>(band));
            std::normal_distribution<double> gauss(0.0, 1.0);
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            PointCloud cloud;
            cloud.points.reserve(n_points);
            for (int i = 0; i < n_points; ++i) {
                double x = gauss(rng), y = gauss(rng), z = gauss(rng);
                double norm = std::sqrt(x * x + y * y + z * z);
                if (norm == 0.0) norm = 1.0;
                double radius = 0.9 * std::cbrt(unif(rng));
                cloud.points.push_back(
                    {x / norm * radius, y / norm * radius, z / norm * radius});
            }
            BallGrid grid = bin_cloud(cloud, cfg.grid[0], cfg.grid[1], cfg.grid[2]);
            Moments f = forward_moments(grid, basis);
            for (const auto& dims : cfg.bench.lattices) {
                BallGrid lattice(dims[0], dims[1], dims[2]);
                OpCounts cost = conv_flop_count(band, lattice.cell_count());
                long long best_ns = -1;
                volatile double sink = 0.0;
                for (int run = 0; run < 3; ++run) {
                    auto t0 = std::chrono::steady_clock::now();
                    BallGrid field = blended_conv(f, g, basis, lattice);
                    auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();
                    sink = field.values.front();
                    if (best_ns < 0 || ns < best_ns) best_ns = ns;
                }
                (void)sink;
                csv << band << ',' << dims_str(dims[0], dims[1], dims[2]) << ',' << n_points
                    << ',' << cost.multiplies << ',' << cost.adds << ','
                    << cost.transcendentals << ',' << best_ns << '\n';
                ++rows;
            }
        }
    }

    std::ostringstream rep;
    rep << "benchmark report\n"
        << "rows: " << rows << " (bench.csv)\n"
        << "columns: n_max, lattice, points, multiplies, adds, transcendentals, wall_ns\n"
        << "operation counts are the per-query spectral cost over the whole lattice; rows\n"
        << "sharing (n_max, lattice) carry identical counts regardless of the point count,\n"
        << "which only affects binning and analysis done before the queries\n";
    write_text(out / "bench_report.txt", rep.str());
    std::cout << rep.str() << "wrote " << (out / "bench.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectral analysis, learning, and retrieval for 3-D shapes on the unit ball"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir;
    unsigned long long seed = 0;
    int threads = 1;
    auto* opt_config = app.add_option("--config", config_path, "JSON configuration file");
    auto* opt_seed = app.add_option("--seed", seed, "seed for every random choice");
    auto* opt_out = app.add_option("--out", out_dir, "output directory");
    auto* opt_threads = app.add_option("--threads", threads, "worker thread cap");

    auto* c_basis = app.add_subcommand("derive-basis", "derive the orthogonal radial family");
    int n_max = 0;
    std::string mode_str, conv_str;
    int quad_nodes = 0;
    auto* opt_nmax = c_basis->add_option("--n-max", n_max, "band limit");
    auto* opt_mode = c_basis->add_option("--mode", mode_str,
                                         "radial family: truncated-sum or exponential");
    auto* opt_quad = c_basis->add_option("--quad-nodes", quad_nodes, "quadrature node count");

    auto* c_bin = app.add_subcommand("bin", "bin a point cloud or mesh onto the ball grid");
    std::string bin_input;
    std::vector<int> grid_dims;
    c_bin->add_option("--input", bin_input, "point cloud (x y z [c]) or ASCII OFF mesh")
        ->required();
    auto* opt_grid =
        c_bin->add_option("--grid", grid_dims, "grid dims: R THETA PHI")->expected(3);

    auto* c_transform = app.add_subcommand("transform", "project a grid onto the basis");
    std::string tf_input, tf_basis;
    c_transform->add_option("--input", tf_input, "grid file")->required();
    c_transform->add_option("--basis", tf_basis, "basis file (default: derive from config)");

    auto* c_convolve = app.add_subcommand("convolve", "evaluate the correlation field");
    std::string cv_input, cv_basis, cv_kernel;
    bool cv_rotation_only = false;
    std::vector<int> lattice_dims;
    c_convolve->add_option("--input", cv_input, "grid file")->required();
    c_convolve->add_option("--basis", cv_basis, "basis file (default: derive from config)");
    c_convolve->add_option("--kernel", cv_kernel,
                           "kernel spectrum file (default: zonal Gaussian cap)");
    c_convolve->add_flag("--rotation-only", cv_rotation_only,
                         "drop the radial shift axis coupling");
    auto* opt_lattice =
        c_convolve->add_option("--lattice", lattice_dims, "query lattice dims: R THETA PHI")
            ->expected(3);

    auto* c_train = app.add_subcommand("train", "train the two-layer classifier");
    int per_class = 0, iters_poly = -1, iters_kernel = -1, batch = 0;
    auto* opt_per_class = c_train->add_option("--per-class", per_class,
                                              "synthetic shapes per class");
    auto* opt_ip = c_train->add_option("--iters-polynomial", iters_poly,
                                       "projection warm-up steps");
    auto* opt_ik = c_train->add_option("--iters-kernel", iters_kernel, "kernel steps");
    auto* opt_batch = c_train->add_option("--batch", batch, "batch size");
    auto* opt_conv = c_train->add_option("--conv", conv_str,
                                         "kernel family: blended or rotation-only");

    auto* c_retrieve = app.add_subcommand("retrieve", "build a descriptor gallery and rank");
    std::string rt_checkpoint;
    std::vector<std::string> rt_queries;
    c_retrieve->add_option("--checkpoint", rt_checkpoint,
                           "trained checkpoint (default: <out>/checkpoint.json)");
    c_retrieve->add_option("--query", rt_queries, "cloud or mesh files to rank");
    std::string metric_str;
    auto* opt_metric = c_retrieve->add_option(
        "--metric", metric_str, "query metric: cosine, euclidean, kl, bhattacharyya");

    auto* c_bench = app.add_subcommand("bench", "sweep the spectral query cost");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        RunConfig cfg;
        if (opt_config->count()) apply_config_file(config_path, cfg);
        if (opt_seed->count()) cfg.seed = seed;
        if (opt_out->count()) cfg.out = out_dir;
        if (opt_threads->count()) cfg.threads = threads;
        if (opt_nmax->count()) cfg.n_max = n_max;
        if (opt_mode->count()) cfg.mode = parse_mode(mode_str);
        if (opt_quad->count()) cfg.quad_nodes = quad_nodes;
        if (opt_grid->count()) cfg.grid = {grid_dims[0], grid_dims[1], grid_dims[2]};
        if (opt_lattice->count())
            cfg.lattice = {lattice_dims[0], lattice_dims[1], lattice_dims[2]};
        if (opt_per_class->count()) cfg.dataset.per_class = per_class;
        if (opt_ip->count()) cfg.train.iters_polynomial = iters_poly;
        if (opt_ik->count()) cfg.train.iters_kernel = iters_kernel;
        if (opt_batch->count()) cfg.train.batch_size = batch;
        if (opt_conv->count()) cfg.conv = parse_conv_kind(conv_str);
        if (opt_metric->count()) cfg.metric = parse_similarity(metric_str);
        cfg.validate();

        if (c_basis->parsed()) return cmd_derive_basis(cfg);
        if (c_bin->parsed()) return cmd_bin(cfg, bin_input);
        if (c_transform->parsed()) return cmd_transform(cfg, tf_input, tf_basis);
        if (c_convolve->parsed())
            return cmd_convolve(cfg, cv_input, cv_basis, cv_kernel, cv_rotation_only);
        if (c_train->parsed()) return cmd_train(cfg);
        if (c_retrieve->parsed()) {
            if (!rt_checkpoint.empty()) cfg.checkpoint = rt_checkpoint;
            return cmd_retrieve(cfg, rt_queries);
        }
        if (c_bench->parsed()) return cmd_bench(cfg);
        std::cerr << "error: no command selected\n";
        return 1;
    } catch (const input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const numerical_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
