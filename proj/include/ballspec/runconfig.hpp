#pragma once

#include <json.hpp>

#include <array>
#include <fstream>
#include <string>
#include <vector>

#include "ballspec/errors.hpp"
#include "ballspec/learn.hpp"
#include "ballspec/radial.hpp"
#include "ballspec/retrieval.hpp"
#include "ballspec/serialization.hpp"

// One configuration object feeds every command.  Values resolve in three
// layers: compiled defaults, then the --config file, then explicit flags.

namespace ballspec {

struct DatasetSpec {
    enum class Kind { Synthetic, Files };
    Kind kind = Kind::Synthetic;
    int per_class = 10;        // synthetic
    double jitter = 0.01;      // synthetic
    std::string glob;          // files: pattern whose parent directories name the classes
};

// Zonal Gaussian cap knobs for kernels built spatially.
struct KernelSpec {
    double kappa_phi = 40.0;
    double kappa_r = 60.0;
    double r0 = 0.5;
};

struct BenchSpec {
    std::vector<int> band_limits = {2, 3, 4, 5};
    std::vector<std::array<int, 3>> lattices = {{4, 4, 4}, {6, 6, 6}, {8, 8, 8}};
    std::vector<int> points = {1000, 10000};
};

struct RunConfig {
    int n_max = 5;
    Mode mode = Mode::Exponential;
    int quad_nodes = kDefaultQuadNodes;
    std::array<int, 3> grid = {25, 36, 18};
    std::array<int, 3> lattice = {8, 8, 8};
    ConvKind conv = ConvKind::Blended;
    unsigned long long seed = 0;
    int threads = 1;
    int descriptor_dim = 1000;
    Similarity metric = Similarity::Cosine;
    std::string out = "out";
    std::string checkpoint;  // defaults to <out>/checkpoint.json when empty

    TrainConfig train;
    DatasetSpec dataset;
    int eval_per_class = 0;  // held-out synthetic test split; 0 disables
    KernelSpec kernel;
    BenchSpec bench;

    TrainConfig to_train_config() const {
        TrainConfig cfg = train;
        cfg.grid_r = grid[0];
        cfg.grid_theta = grid[1];
        cfg.grid_phi = grid[2];
        cfg.lat_r = lattice[0];
        cfg.lat_theta = lattice[1];
        cfg.lat_phi = lattice[2];
        cfg.conv = conv;
        cfg.seed = seed;
        return cfg;
    }

    void validate() const {
        if (n_max < 0 || n_max > kMaxBandLimit)
            throw input_error("config: band limit out of range");
        if (quad_nodes < 1) throw input_error("config: quad_nodes must be positive");
        for (int d : grid)
            if (d < 1) throw input_error("config: grid dims must be positive");
        for (int d : lattice)
            if (d < 1) throw input_error("config: lattice dims must be positive");
        if (threads < 1) throw input_error("config: threads must be positive");
        if (descriptor_dim < 1) throw input_error("config: descriptor_dim must be positive");
        if (dataset.kind == DatasetSpec::Kind::Synthetic) {
            if (dataset.per_class < 1)
                throw input_error("config: dataset.per_class must be positive");
            if (!(dataset.jitter >= 0.0))
                throw input_error("config: dataset.jitter must be non-negative");
        } else if (dataset.glob.empty()) {
            throw input_error("config: dataset.glob is required for a file dataset");
        }
        if (eval_per_class < 0) throw input_error("config: eval_per_class must be non-negative");
        if (!(kernel.kappa_phi > 0.0 && kernel.kappa_r > 0.0))
            throw input_error("config: kernel sharpness must be positive");
        if (!(kernel.r0 >= 0.0 && kernel.r0 <= 1.0))
            throw input_error("config: kernel center radius must lie in [0, 1]");
        if (bench.band_limits.empty() || bench.lattices.empty() || bench.points.empty())
            throw input_error("config: bench sweeps must be nonempty");
        for (int b : bench.band_limits)
            if (b < 1 || b > kMaxBandLimit)
                throw input_error("config: bench band limit out of range");
        for (const auto& lat : bench.lattices)
            for (int d : lat)
                if (d < 1) throw input_error("config: bench lattice dims must be positive");
        for (int p : bench.points)
            if (p < 1) throw input_error("config: bench point counts must be positive");
    }
};

namespace detail {

inline void check_keys(const json& j, const std::string& where,
                       std::initializer_list<const char*> allowed) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw input_error("config: unknown key '" + item.key() + "' in " + where);
    }
}

inline std::array<int, 3> read_dims(const json& j, const std::string& key) {
    if (!j[key].is_array() || j[key].size() != 3)
        throw input_error("config: '" + key + "' must be an array of three integers");
    std::array<int, 3> out{};
    for (int i = 0; i < 3; ++i) {
        if (!j[key][i].is_number_integer())
            throw input_error("config: '" + key + "' must be an array of three integers");
        out[i] = j[key][i].get<int>();
        if (out[i] < 1)
            throw input_error("config: '" + key + "' dims must be positive");
    }
    return out;
}

}  // namespace detail

// Applies a JSON config document on top of the compiled defaults in `cfg`.
// Unknown keys are rejected so typos fail loudly instead of being ignored.
inline void apply_config_json(const nlohmann::ordered_json& doc, RunConfig& cfg) {
    using detail::check_keys;
    using detail::read_dims;
    if (!doc.is_object()) throw input_error("config: top level must be an object");
    check_keys(doc, "the top level",
               {"n_max", "mode", "quad_nodes", "grid", "lattice", "conv", "seed", "threads",
                "descriptor_dim", "metric", "out", "checkpoint", "train", "dataset",
                "eval_per_class", "kernel", "bench"});
    auto get_int = [&](const nlohmann::ordered_json& j, const char* key, int& out) {
        if (!j.contains(key)) return;
        if (!j[key].is_number_integer())
            throw input_error("config: '" + std::string(key) + "' must be an integer");
        out = j[key].get<int>();
    };
    auto get_double = [&](const nlohmann::ordered_json& j, const char* key, double& out) {
        if (!j.contains(key)) return;
        if (!j[key].is_number())
            throw input_error("config: '" + std::string(key) + "' must be a number");
        out = j[key].get<double>();
    };
    auto get_string = [&](const nlohmann::ordered_json& j, const char* key, std::string& out) {
        if (!j.contains(key)) return;
        if (!j[key].is_string())
            throw input_error("config: '" + std::string(key) + "' must be a string");
        out = j[key].get<std::string>();
    };

    get_int(doc, "n_max", cfg.n_max);
    if (doc.contains("mode")) {
        std::string s;
        get_string(doc, "mode", s);
        try {
            cfg.mode = parse_mode(s);
        } catch (const std::domain_error&) {
            throw input_error("config: unknown mode '" + s + "'");
        }
    }
    get_int(doc, "quad_nodes", cfg.quad_nodes);
    if (doc.contains("grid")) cfg.grid = read_dims(doc, "grid");
    if (doc.contains("lattice")) cfg.lattice = read_dims(doc, "lattice");
    if (doc.contains("conv")) {
        std::string s;
        get_string(doc, "conv", s);
        cfg.conv = parse_conv_kind(s);
    }
    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_integer() || doc["seed"].get<long long>() < 0)
            throw input_error("config: 'seed' must be a non-negative integer");
        cfg.seed = doc["seed"].get<unsigned long long>();
    }
    get_int(doc, "threads", cfg.threads);
    get_int(doc, "descriptor_dim", cfg.descriptor_dim);
    if (doc.contains("metric")) {
        std::string s;
        get_string(doc, "metric", s);
        cfg.metric = parse_similarity(s);
    }
    get_string(doc, "out", cfg.out);
    get_string(doc, "checkpoint", cfg.checkpoint);

    if (doc.contains("train")) {
        const auto& t = doc["train"];
        if (!t.is_object()) throw input_error("config: 'train' must be an object");
        check_keys(t, "'train'",
                   {"lr_polynomial", "lr_kernel", "beta1", "beta2", "adam_eps",
                    "iters_polynomial", "iters_kernel", "batch_size"});
        get_double(t, "lr_polynomial", cfg.train.lr_polynomial);
        get_double(t, "lr_kernel", cfg.train.lr_kernel);
        get_double(t, "beta1", cfg.train.beta1);
        get_double(t, "beta2", cfg.train.beta2);
        get_double(t, "adam_eps", cfg.train.adam_eps);
        get_int(t, "iters_polynomial", cfg.train.iters_polynomial);
        get_int(t, "iters_kernel", cfg.train.iters_kernel);
        get_int(t, "batch_size", cfg.train.batch_size);
    }

    if (doc.contains("dataset")) {
        const auto& d = doc["dataset"];
        if (!d.is_object()) throw input_error("config: 'dataset' must be an object");
        check_keys(d, "'dataset'", {"kind", "per_class", "jitter", "glob"});
        std::string kind = "synthetic";
        get_string(d, "kind", kind);
        if (kind == "synthetic")
            cfg.dataset.kind = DatasetSpec::Kind::Synthetic;
        else if (kind == "files")
            cfg.dataset.kind = DatasetSpec::Kind::Files;
        else
            throw input_error("config: dataset kind must be 'synthetic' or 'files'");
        get_int(d, "per_class", cfg.dataset.per_class);
        get_double(d, "jitter", cfg.dataset.jitter);
        get_string(d, "glob", cfg.dataset.glob);
    }
    get_int(doc, "eval_per_class", cfg.eval_per_class);

    if (doc.contains("kernel")) {
        const auto& k = doc["kernel"];
        if (!k.is_object()) throw input_error("config: 'kernel' must be an object");
        check_keys(k, "'kernel'", {"kappa_phi", "kappa_r", "r0"});
        get_double(k, "kappa_phi", cfg.kernel.kappa_phi);
        get_double(k, "kappa_r", cfg.kernel.kappa_r);
        get_double(k, "r0", cfg.kernel.r0);
    }

    if (doc.contains("bench")) {
        const auto& b = doc["bench"];
        if (!b.is_object()) throw input_error("config: 'bench' must be an object");
        check_keys(b, "'bench'", {"band_limits", "lattices", "points"});
        if (b.contains("band_limits")) {
            if (!b["band_limits"].is_array())
                throw input_error("config: bench band_limits must be an array");
            cfg.bench.band_limits.clear();
            for (const auto& v : b["band_limits"]) {
                if (!v.is_number_integer())
                    throw input_error("config: bench band_limits must be integers");
                cfg.bench.band_limits.push_back(v.get<int>());
            }
        }
        if (b.contains("lattices")) {
            if (!b["lattices"].is_array())
                throw input_error("config: bench lattices must be an array");
            cfg.bench.lattices.clear();
            for (const auto& lat : b["lattices"]) {
                if (!lat.is_array() || lat.size() != 3)
                    throw input_error("config: each bench lattice must be three integers");
                std::array<int, 3> dims{};
                for (int i = 0; i < 3; ++i) {
                    if (!lat[i].is_number_integer())
                        throw input_error("config: each bench lattice must be three integers");
                    dims[i] = lat[i].get<int>();
                }
                cfg.bench.lattices.push_back(dims);
            }
        }
        if (b.contains("points")) {
            if (!b["points"].is_array())
                throw input_error("config: bench points must be an array");
            cfg.bench.points.clear();
            for (const auto& v : b["points"]) {
                if (!v.is_number_integer())
                    throw input_error("config: bench points must be integers");
                cfg.bench.points.push_back(v.get<int>());
            }
        }
    }
}

inline void apply_config_file(const std::string& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open config '" + path + "'");
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw input_error(path + ": " + e.what());
    }
    apply_config_json(doc, cfg);
}

}  // namespace ballspec
