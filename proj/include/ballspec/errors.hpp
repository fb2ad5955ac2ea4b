#pragma once

#include <stdexcept>
#include <string>

namespace ballspec {

// Malformed or out-of-contract input: bad file contents, invalid argument
// combinations, unsupported mode requests.  CLI maps these to exit code 1.
class input_error : public std::runtime_error {
public:
    explicit input_error(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure at runtime: non-finite intermediates, failed convergence.
// CLI maps these to exit code 2.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

// Orthogonalization met a residual indistinguishable from zero, so the basis
// element at the named index cannot be normalized.
class degeneracy_error : public numerical_error {
public:
    degeneracy_error(int n, int l, double residual_norm2)
        : numerical_error("degenerate basis element at (n=" + std::to_string(n) +
                          ", l=" + std::to_string(l) +
                          "): residual norm^2 = " + std::to_string(residual_norm2)),
          n(n), l(l), residual_norm2(residual_norm2) {}
    int n, l;
    double residual_norm2;
};

// An object was used before reaching the state its operation requires, e.g. a
// descriptor reducer applied before fitting.
class state_error : public input_error {
public:
    explicit state_error(const std::string& what) : input_error(what) {}
};

// The requested similarity score has no defined value for these inputs, e.g.
// cosine similarity of a zero-norm descriptor.
class undefined_similarity_error : public numerical_error {
public:
    explicit undefined_similarity_error(const std::string& what) : numerical_error(what) {}
};

// A kernel passed to a rotation-aware operation carries angular content in
// m != 0 components beyond tolerance, i.e. it is not zonal.
class zonality_error : public input_error {
public:
    explicit zonality_error(double worst_magnitude)
        : input_error("kernel is not zonal: largest |coefficient| with m != 0 is " +
                      std::to_string(worst_magnitude)),
          worst_magnitude(worst_magnitude) {}
    double worst_magnitude;
};

}  // namespace ballspec
