#pragma once

#include <json.hpp>

#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ballspec/basis.hpp"
#include "ballspec/errors.hpp"
#include "ballspec/grid.hpp"
#include "ballspec/learn.hpp"
#include "ballspec/pointcloud.hpp"
#include "ballspec/retrieval.hpp"
#include "ballspec/transform.hpp"

// Persistence for every pipeline artifact.  All files are JSON documents with
// a "format" tag and a "version" so a reader can reject the wrong kind early;
// numeric payloads are flat arrays in the same order the in-memory types use,
// written with shortest-round-trip doubles so save/load is bit-exact.

namespace ballspec {

namespace detail {

using json = nlohmann::ordered_json;

inline void require_finite(const std::vector<double>& v, const std::string& what) {
    for (double x : v)
        if (!std::isfinite(x))
            throw numerical_error("cannot serialize non-finite values in " + what);
}

inline void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw input_error("cannot open '" + path + "' for writing");
    out << j.dump(1) << '\n';
    if (!out) throw input_error("failed while writing '" + path + "'");
}

inline json read_json(const std::string& path, const char* format, int version) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw input_error(path + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("format") || !j["format"].is_string())
        throw input_error(path + ": missing format tag");
    std::string found = j["format"].get<std::string>();
    if (found != format)
        throw input_error(path + ": expected a " + std::string(format) + " file, found '" +
                          found + "'");
    if (!j.contains("version") || !j["version"].is_number_integer() ||
        j["version"].get<int>() != version)
        throw input_error(path + ": unsupported " + std::string(format) + " version");
    return j;
}

inline std::vector<double> read_doubles(const json& j, const std::string& path,
                                        const std::string& key, std::size_t expect) {
    if (!j.contains(key) || !j[key].is_array())
        throw input_error(path + ": missing array '" + key + "'");
    std::vector<double> out;
    out.reserve(j[key].size());
    for (const auto& v : j[key]) {
        if (!v.is_number()) throw input_error(path + ": non-numeric entry in '" + key + "'");
        out.push_back(v.get<double>());
    }
    if (expect != static_cast<std::size_t>(-1) && out.size() != expect)
        throw input_error(path + ": '" + key + "' holds " + std::to_string(out.size()) +
                          " values, expected " + std::to_string(expect));
    return out;
}

inline int read_int(const json& j, const std::string& path, const std::string& key) {
    if (!j.contains(key) || !j[key].is_number_integer())
        throw input_error(path + ": missing integer '" + key + "'");
    return j[key].get<int>();
}

inline double read_double(const json& j, const std::string& path, const std::string& key) {
    if (!j.contains(key) || !j[key].is_number())
        throw input_error(path + ": missing number '" + key + "'");
    return j[key].get<double>();
}

inline std::string read_string(const json& j, const std::string& path, const std::string& key) {
    if (!j.contains(key) || !j[key].is_string())
        throw input_error(path + ": missing string '" + key + "'");
    return j[key].get<std::string>();
}

inline Mode parse_mode_field(const json& j, const std::string& path) {
    std::string s = read_string(j, path, "mode");
    try {
        return parse_mode(s);
    } catch (const std::domain_error&) {
        throw input_error(path + ": unknown mode '" + s + "'");
    }
}

}  // namespace detail

inline void save_basis(const std::string& path, const BasisSet& basis) {
    detail::json j;
    j["format"] = "basis";
    j["version"] = 1;
    j["n_max"] = basis.n_max;
    j["mode"] = mode_name(basis.mode);
    j["quad_nodes"] = basis.quad_nodes;
    detail::json radials = detail::json::array();
    for (const RadialPolynomial& p : basis.radials) {
        detail::require_finite(p.coeffs, "basis radials");
        radials.push_back(p.coeffs);
    }
    j["radials"] = std::move(radials);
    detail::require_finite(basis.norms2, "basis norms");
    j["norms2"] = basis.norms2;
    detail::require_finite(basis.mixing.data(), "basis mixing table");
    j["mixing"] = basis.mixing.data();
    detail::require_finite(basis.gram, "basis gram table");
    j["gram"] = basis.gram;
    detail::write_json(path, j);
}

inline BasisSet load_basis(const std::string& path) {
    detail::json j = detail::read_json(path, "basis", 1);
    BasisSet basis;
    basis.n_max = detail::read_int(j, path, "n_max");
    if (basis.n_max < 0 || basis.n_max > kMaxBandLimit)
        throw input_error(path + ": band limit out of range");
    basis.mode = detail::parse_mode_field(j, path);
    basis.quad_nodes = detail::read_int(j, path, "quad_nodes");
    std::size_t entries = BasisSet::triangle_index(basis.n_max + 1, 0);
    if (!j.contains("radials") || !j["radials"].is_array() || j["radials"].size() != entries)
        throw input_error(path + ": radial table does not match the band limit");
    basis.radials.reserve(entries);
    std::size_t flat = 0;
    for (int n = 0; n <= basis.n_max; ++n)
        for (int l = 0; l <= n; ++l, ++flat) {
            const auto& arr = j["radials"][flat];
            // Coefficient counts vary by mode (monomial degree vs exponential
            // rate), so only an upper bound is checked.
            if (!arr.is_array() || arr.size() > static_cast<std::size_t>(n) + 1)
                throw input_error(path + ": radial entry " + std::to_string(flat) +
                                  " has the wrong coefficient count");
            RadialPolynomial p;
            p.mode = basis.mode;
            for (const auto& c : arr) {
                if (!c.is_number())
                    throw input_error(path + ": non-numeric radial coefficient");
                p.coeffs.push_back(c.get<double>());
            }
            basis.radials.push_back(std::move(p));
        }
    basis.norms2 = detail::read_doubles(j, path, "norms2", entries);
    basis.mixing = MixingCoefficients(basis.n_max);
    basis.mixing.data() = detail::read_doubles(j, path, "mixing", basis.mixing.size());
    std::size_t chain = static_cast<std::size_t>(basis.n_max) + 1;
    basis.gram = detail::read_doubles(j, path, "gram", chain * chain * chain);
    return basis;
}

// A binned grid plus the per-cell point tally the binning produced; the tally
// is absent when the grid did not come from a point cloud.
struct GridDocument {
    BallGrid grid;
    std::vector<int> counts;
};

namespace detail {

inline void save_lattice(const std::string& path, const char* format, const BallGrid& g,
                         const std::vector<int>* counts) {
    require_finite(g.values, format);
    json j;
    j["format"] = format;
    j["version"] = 1;
    j["dims"] = std::array<int, 3>{g.n_r, g.n_theta, g.n_phi};
    j["values"] = g.values;
    if (counts) {
        if (counts->size() != g.cell_count())
            throw input_error("count array does not match the grid size");
        j["counts"] = *counts;
    }
    write_json(path, j);
}

inline GridDocument load_lattice(const std::string& path, const char* format) {
    json j = read_json(path, format, 1);
    if (!j.contains("dims") || !j["dims"].is_array() || j["dims"].size() != 3)
        throw input_error(path + ": missing dims");
    int dims[3];
    for (int i = 0; i < 3; ++i) {
        if (!j["dims"][i].is_number_integer() || j["dims"][i].get<int>() < 1)
            throw input_error(path + ": dims must be positive integers");
        dims[i] = j["dims"][i].get<int>();
    }
    GridDocument doc;
    doc.grid = BallGrid(dims[0], dims[1], dims[2]);
    doc.grid.values = read_doubles(j, path, "values", doc.grid.cell_count());
    if (j.contains("counts")) {
        if (!j["counts"].is_array() || j["counts"].size() != doc.grid.cell_count())
            throw input_error(path + ": counts do not match the grid size");
        for (const auto& c : j["counts"]) {
            if (!c.is_number_integer() || c.get<long long>() < 0)
                throw input_error(path + ": counts must be non-negative integers");
            doc.counts.push_back(c.get<int>());
        }
    }
    return doc;
}

}  // namespace detail

inline void save_grid(const std::string& path, const BallGrid& grid,
                      const std::vector<int>* counts = nullptr) {
    detail::save_lattice(path, "grid", grid, counts);
}

inline GridDocument load_grid(const std::string& path) {
    return detail::load_lattice(path, "grid");
}

// Correlation fields share the lattice layout but mean something different
// (shift distance and aim angles), so they carry their own tag.
inline void save_field(const std::string& path, const BallGrid& field) {
    detail::save_lattice(path, "field", field, nullptr);
}

inline BallGrid load_field(const std::string& path) {
    return detail::load_lattice(path, "field").grid;
}

inline void save_moments(const std::string& path, const Moments& m) {
    detail::json j;
    j["format"] = "moments";
    j["version"] = 1;
    j["n_max"] = m.n_max;
    std::vector<double> flat;
    flat.reserve(2 * m.values.size());
    for (const std::complex<double>& z : m.values) {
        flat.push_back(z.real());
        flat.push_back(z.imag());
    }
    detail::require_finite(flat, "moments");
    j["values"] = std::move(flat);
    detail::write_json(path, j);
}

inline Moments load_moments(const std::string& path) {
    detail::json j = detail::read_json(path, "moments", 1);
    int n_max = detail::read_int(j, path, "n_max");
    if (n_max < 0 || n_max > kMaxBandLimit)
        throw input_error(path + ": band limit out of range");
    Moments m(n_max);
    std::vector<double> flat = detail::read_doubles(j, path, "values", 2 * m.values.size());
    for (std::size_t i = 0; i < m.values.size(); ++i)
        m.values[i] = {flat[2 * i], flat[2 * i + 1]};
    return m;
}

inline void save_kernel(const std::string& path, const KernelSpectrum& k) {
    detail::require_finite(k.values, "kernel");
    detail::json j;
    j["format"] = "kernel";
    j["version"] = 1;
    j["n_max"] = k.n_max;
    j["values"] = k.values;
    detail::write_json(path, j);
}

inline KernelSpectrum load_kernel(const std::string& path) {
    detail::json j = detail::read_json(path, "kernel", 1);
    int n_max = detail::read_int(j, path, "n_max");
    if (n_max < 0 || n_max > kMaxBandLimit)
        throw input_error(path + ": band limit out of range");
    KernelSpectrum k(n_max);
    k.values = detail::read_doubles(j, path, "values", k.values.size());
    return k;
}

// A checkpoint carries the basis recipe (mode, quadrature nodes) next to the
// parameters so retrieval can rebuild the exact training-time basis.
struct NetworkDocument {
    NetworkParams params;
    Mode mode = Mode::Exponential;
    int quad_nodes = kDefaultQuadNodes;
};

inline void save_network(const std::string& path, const NetworkParams& p, Mode mode,
                         int quad_nodes = kDefaultQuadNodes) {
    detail::json j;
    j["format"] = "network";
    j["version"] = 1;
    j["n_max"] = p.n_max;
    j["mode"] = mode_name(mode);
    j["quad_nodes"] = quad_nodes;
    j["lattice"] = std::array<int, 3>{p.lat_r, p.lat_theta, p.lat_phi};
    j["classes"] = p.classes;
    j["groups"] = std::array<int, 2>{p.groups1, p.groups2};
    j["gn_eps"] = p.gn_eps;
    j["conv"] = conv_kind_name(p.conv);
    detail::require_finite(p.projection.data(), "projection weights");
    j["projection"] = p.projection.data();
    auto kernel_bank = [](const std::vector<KernelSpectrum>& bank) {
        detail::json arr = detail::json::array();
        for (const KernelSpectrum& k : bank) {
            detail::require_finite(k.values, "kernel bank");
            arr.push_back(k.values);
        }
        return arr;
    };
    j["layer1"] = kernel_bank(p.layer1);
    j["layer2"] = kernel_bank(p.layer2);
    for (const auto* block : {&p.gn1_scale, &p.gn1_shift, &p.gn2_scale, &p.gn2_shift,
                              &p.fc_weight, &p.fc_bias})
        detail::require_finite(*block, "network parameters");
    j["gn1_scale"] = p.gn1_scale;
    j["gn1_shift"] = p.gn1_shift;
    j["gn2_scale"] = p.gn2_scale;
    j["gn2_shift"] = p.gn2_shift;
    j["fc_weight"] = p.fc_weight;
    j["fc_bias"] = p.fc_bias;
    detail::write_json(path, j);
}

inline NetworkDocument load_network(const std::string& path) {
    detail::json j = detail::read_json(path, "network", 1);
    NetworkDocument doc;
    NetworkParams& p = doc.params;
    p.n_max = detail::read_int(j, path, "n_max");
    if (p.n_max < 1 || p.n_max > kMaxBandLimit)
        throw input_error(path + ": band limit out of range");
    doc.mode = detail::parse_mode_field(j, path);
    doc.quad_nodes = detail::read_int(j, path, "quad_nodes");
    if (doc.quad_nodes < 1) throw input_error(path + ": quadrature node count must be positive");
    if (!j.contains("lattice") || !j["lattice"].is_array() || j["lattice"].size() != 3)
        throw input_error(path + ": missing lattice dims");
    for (const auto& d : j["lattice"])
        if (!d.is_number_integer()) throw input_error(path + ": lattice dims must be integers");
    p.lat_r = j["lattice"][0].get<int>();
    p.lat_theta = j["lattice"][1].get<int>();
    p.lat_phi = j["lattice"][2].get<int>();
    if (p.lat_r < 1 || p.lat_theta < 1 || p.lat_phi < 1)
        throw input_error(path + ": lattice dims must be positive");
    p.classes = detail::read_int(j, path, "classes");
    if (p.classes < 2) throw input_error(path + ": checkpoint needs at least two classes");
    if (!j.contains("groups") || !j["groups"].is_array() || j["groups"].size() != 2)
        throw input_error(path + ": missing norm groups");
    for (const auto& g : j["groups"])
        if (!g.is_number_integer()) throw input_error(path + ": norm groups must be integers");
    p.groups1 = j["groups"][0].get<int>();
    p.groups2 = j["groups"][1].get<int>();
    p.gn_eps = detail::read_double(j, path, "gn_eps");
    p.conv = parse_conv_kind(detail::read_string(j, path, "conv"));
    p.projection = MixingCoefficients(p.n_max);
    p.projection.data() = detail::read_doubles(j, path, "projection", p.projection.size());
    auto load_bank = [&](const char* key, std::size_t count) {
        if (!j.contains(key) || !j[key].is_array() || j[key].size() != count)
            throw input_error(path + ": kernel bank '" + std::string(key) +
                              "' must hold " + std::to_string(count) + " kernels");
        std::vector<KernelSpectrum> bank;
        bank.reserve(count);
        for (const auto& arr : j[key]) {
            KernelSpectrum k(p.n_max);
            if (!arr.is_array() || arr.size() != k.values.size())
                throw input_error(path + ": kernel entry does not match the band limit");
            for (std::size_t i = 0; i < k.values.size(); ++i) {
                if (!arr[i].is_number())
                    throw input_error(path + ": non-numeric kernel coefficient");
                k.values[i] = arr[i].get<double>();
            }
            bank.push_back(std::move(k));
        }
        return bank;
    };
    p.layer1 = load_bank("layer1", kLayer1Kernels);
    p.layer2 = load_bank("layer2", kLayer2Kernels);
    p.gn1_scale = detail::read_doubles(j, path, "gn1_scale", kLayer1Kernels);
    p.gn1_shift = detail::read_doubles(j, path, "gn1_shift", kLayer1Kernels);
    p.gn2_scale = detail::read_doubles(j, path, "gn2_scale", kLayer2Kernels);
    p.gn2_shift = detail::read_doubles(j, path, "gn2_shift", kLayer2Kernels);
    p.fc_weight = detail::read_doubles(j, path, "fc_weight",
                                       static_cast<std::size_t>(p.classes) * p.feature_count());
    p.fc_bias = detail::read_doubles(j, path, "fc_bias", p.classes);
    if (p.conv == ConvKind::Blended && doc.mode != Mode::Exponential)
        throw input_error(path + ": blended kernels require the exponential mode");
    return doc;
}

inline void save_reducer(const std::string& path, const DescriptorReducer& r) {
    if (!r.fitted()) throw state_error("cannot save an unfitted descriptor reducer");
    detail::json j;
    j["format"] = "reducer";
    j["version"] = 1;
    j["out_dim"] = r.output_dim();
    j["in_dim"] = r.input_dim();
    j["identity"] = r.identity();
    detail::require_finite(r.mean(), "reducer mean");
    j["mean"] = r.mean();
    detail::require_finite(r.components(), "reducer components");
    j["components"] = r.components();
    detail::write_json(path, j);
}

inline DescriptorReducer load_reducer(const std::string& path) {
    detail::json j = detail::read_json(path, "reducer", 1);
    int out_dim = detail::read_int(j, path, "out_dim");
    DescriptorReducer r(out_dim);
    std::size_t in_dim = static_cast<std::size_t>(detail::read_int(j, path, "in_dim"));
    if (!j.contains("identity") || !j["identity"].is_boolean())
        throw input_error(path + ": missing identity flag");
    bool identity = j["identity"].get<bool>();
    std::vector<double> mean = detail::read_doubles(j, path, "mean",
                                                    static_cast<std::size_t>(-1));
    std::vector<double> components = detail::read_doubles(j, path, "components",
                                                          static_cast<std::size_t>(-1));
    try {
        r.restore(in_dim, identity, std::move(mean), std::move(components));
    } catch (const input_error& e) {
        throw input_error(path + ": " + e.what());
    }
    return r;
}

struct GalleryDocument {
    std::vector<Descriptor> descriptors;
    std::vector<int> labels;
};

inline void save_gallery(const std::string& path, const std::vector<Descriptor>& descriptors,
                         const std::vector<int>& labels) {
    if (descriptors.size() != labels.size())
        throw input_error("gallery label count does not match the descriptors");
    detail::json j;
    j["format"] = "gallery";
    j["version"] = 1;
    std::size_t dim = descriptors.empty() ? 0 : descriptors.front().values.size();
    j["dim"] = dim;
    detail::json entries = detail::json::array();
    for (std::size_t i = 0; i < descriptors.size(); ++i) {
        if (descriptors[i].values.size() != dim)
            throw input_error("gallery descriptors must share one dimension");
        detail::require_finite(descriptors[i].values, "gallery descriptor");
        detail::json e;
        e["id"] = descriptors[i].id;
        e["label"] = labels[i];
        e["values"] = descriptors[i].values;
        entries.push_back(std::move(e));
    }
    j["entries"] = std::move(entries);
    detail::write_json(path, j);
}

inline GalleryDocument load_gallery(const std::string& path) {
    detail::json j = detail::read_json(path, "gallery", 1);
    std::size_t dim = static_cast<std::size_t>(detail::read_int(j, path, "dim"));
    if (!j.contains("entries") || !j["entries"].is_array())
        throw input_error(path + ": missing entries");
    GalleryDocument doc;
    for (const auto& e : j["entries"]) {
        Descriptor d;
        d.id = detail::read_string(e, path, "id");
        doc.labels.push_back(detail::read_int(e, path, "label"));
        d.values = detail::read_doubles(e, path, "values", dim);
        doc.descriptors.push_back(std::move(d));
    }
    return doc;
}

namespace detail {

inline PointCloud load_xyz_cloud(const std::string& path, std::istream& in) {
    PointCloud cloud;
    std::string line;
    int line_no = 0;
    bool any_texture = false;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream row(line);
        double x, y, z;
        if (!(row >> x)) continue;  // blank or comment-only line
        if (!(row >> y >> z))
            throw input_error(path + ":" + std::to_string(line_no) +
                              ": expected 'x y z' with an optional attribute");
        double t;
        if (row >> t) {
            if (!any_texture && !cloud.points.empty())
                throw input_error(path + ":" + std::to_string(line_no) +
                                  ": attribute appears on some lines but not all");
            any_texture = true;
            cloud.texture.push_back(t);
        } else if (any_texture) {
            throw input_error(path + ":" + std::to_string(line_no) +
                              ": attribute appears on some lines but not all");
        }
        std::string extra;
        if (row >> extra)
            throw input_error(path + ":" + std::to_string(line_no) +
                              ": trailing tokens after the point");
        cloud.points.push_back({x, y, z});
    }
    if (cloud.points.empty()) throw input_error(path + ": no points found");
    try {
        cloud.validate();
    } catch (const input_error& e) {
        throw input_error(path + ": " + e.what());
    }
    return cloud;
}

inline PointCloud load_off_cloud(const std::string& path, std::istream& in) {
    auto next_data_line = [&](std::string& line, int& line_no) {
        while (std::getline(in, line)) {
            ++line_no;
            std::size_t hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            if (line.find_first_not_of(" \t\r\n") != std::string::npos) return true;
        }
        return false;
    };
    std::string line;
    int line_no = 0;
    if (!next_data_line(line, line_no))
        throw input_error(path + ": empty mesh file");
    std::istringstream header(line);
    std::string magic;
    header >> magic;
    if (magic != "OFF")
        throw input_error(path + ":" + std::to_string(line_no) + ": expected an OFF header");
    long long nv = -1, nf = 0, ne = 0;
    // Counts may share the OFF line or follow on their own.
    if (!(header >> nv >> nf >> ne)) {
        if (!next_data_line(line, line_no))
            throw input_error(path + ": missing vertex counts");
        std::istringstream counts(line);
        if (!(counts >> nv >> nf >> ne))
            throw input_error(path + ":" + std::to_string(line_no) +
                              ": expected 'vertices faces edges'");
    }
    if (nv < 1) throw input_error(path + ": mesh has no vertices");
    PointCloud cloud;
    cloud.points.reserve(static_cast<std::size_t>(nv));
    for (long long i = 0; i < nv; ++i) {
        if (!next_data_line(line, line_no))
            throw input_error(path + ": vertex list ends after " + std::to_string(i) +
                              " of " + std::to_string(nv));
        std::istringstream row(line);
        double x, y, z;
        if (!(row >> x >> y >> z))
            throw input_error(path + ":" + std::to_string(line_no) + ": malformed vertex");
        cloud.points.push_back({x, y, z});
    }
    try {
        cloud.validate();
    } catch (const input_error& e) {
        throw input_error(path + ": " + e.what());
    }
    return cloud;
}

}  // namespace detail

// Reads a point cloud from whitespace text (one 'x y z [attribute]' per line)
// or from an ASCII OFF mesh, whose vertices become the cloud.  The mesh path
// is taken when the first token is the OFF magic.
inline PointCloud load_cloud(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open '" + path + "'");
    std::string probe;
    in >> probe;
    in.clear();
    in.seekg(0);
    if (probe == "OFF") return detail::load_off_cloud(path, in);
    return detail::load_xyz_cloud(path, in);
}

}  // namespace ballspec
