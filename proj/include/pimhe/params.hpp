#pragma once

#include "pimhe/bigint.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pimhe {

/// HE parameter set over power-of-two moduli: q = 2^k, t = 2^t_log2.
struct ParamSet {
    unsigned k = 0;            // ciphertext modulus bit width, q = 2^k
    unsigned n = 0;            // ring degree, power of two
    unsigned t_log2 = 0;       // plaintext modulus t = 2^t_log2
    unsigned error_bound = 1;  // B, bound of the error distribution
    unsigned security_bits = 0;  // declared security level (informational)

    BigInt q() const { return pow2(k); }
    BigInt t() const { return pow2(t_log2); }
    /// Delta = floor(q/t) = 2^(k - t_log2), exact for power-of-two moduli.
    BigInt delta() const { return pow2(k - t_log2); }
};

struct ValidationResult {
    bool ok = true;
    std::vector<std::string> violations;
};

struct DepthEstimate {
    unsigned depth = 0;             // L, maximum multiplicative depth
    BigInt expansion_factor = 0;    // delta_R used in the bound
};

inline bool is_power_of_two(unsigned long long v) { return v != 0 && (v & (v - 1)) == 0; }

inline ValidationResult validate(const ParamSet& p) {
    ValidationResult r;
    auto fail = [&r](std::string msg) {
        r.ok = false;
        r.violations.push_back(std::move(msg));
    };
    if (p.k == 0) fail("k must be positive");
    if (p.t_log2 == 0) fail("t_log2 must be positive");
    if (p.n < 2 || !is_power_of_two(p.n)) fail("n not a power of two (or n < 2)");
    if (p.k != 0 && p.t_log2 != 0 && p.k < p.t_log2 + 1)
        fail("k <= t_log2: ciphertext modulus must exceed plaintext modulus");
    if (p.error_bound == 0) fail("error_bound must be positive");
    return r;
}

namespace detail {
using Real = boost::multiprecision::cpp_bin_float_100;  // ~332 bits of mantissa

inline Real log2r(const Real& x) { return boost::multiprecision::log2(x); }
}  // namespace detail

/// Supported multiplicative depth: the largest integer L strictly below
///   [log(floor(q/B)/4) + log(t) - log(d+1.25)] / [log(d) + log(d) ... ]
/// evaluated with high-precision arithmetic so the floor at the integer
/// boundary is unambiguous. The expansion factor d is taken as 2n; see the
/// README notes on parameter selection.
inline DepthEstimate multiplicative_depth(const ParamSet& p) {
    ValidationResult v = validate(p);
    if (!v.ok) throw std::invalid_argument("multiplicative_depth: invalid parameters: " + v.violations.front());

    using detail::Real;
    const BigInt delta_r = BigInt(2) * p.n;
    const Real d(delta_r.str());
    const Real d125 = d + Real("1.25");
    const BigInt q_over_b = p.q() / p.error_bound;  // floor(q/B)
    const Real log_qb = detail::log2r(Real(q_over_b.str()));
    const Real log_t = Real(p.t_log2);

    const Real num = (log_qb - 2) + log_t - detail::log2r(d125);
    const Real den = detail::log2r(d) + detail::log2r(d125) + log_t;
    const Real rhs = num / den;
    if (rhs <= 0) throw std::domain_error("multiplicative_depth: bound is non-positive for this parameter set");

    // largest integer strictly less than rhs
    Real fl = boost::multiprecision::floor(rhs);
    unsigned L = static_cast<unsigned>(fl.convert_to<unsigned long long>());
    if (Real(L) == rhs && L > 0) L -= 1;
    return DepthEstimate{L, delta_r};
}

inline ParamSet params_from_json(const nlohmann::json& j) {
    ParamSet p;
    p.k = j.at("k").get<unsigned>();
    p.n = j.at("n").get<unsigned>();
    p.t_log2 = j.at("t_log2").get<unsigned>();
    p.error_bound = j.value("error_bound", 1u);
    p.security_bits = j.value("security_bits", 0u);
    return p;
}

inline nlohmann::json params_to_json(const ParamSet& p) {
    return {{"k", p.k}, {"n", p.n}, {"t_log2", p.t_log2},
            {"error_bound", p.error_bound}, {"security_bits", p.security_bits}};
}

/// Built-in named parameter sets. The two large presets reproduce the
/// published evaluation settings; the desk presets are small configurations
/// for fast exhaustive testing.
inline const std::map<std::string, ParamSet>& builtin_presets() {
    static const std::map<std::string, ParamSet> presets = {
        {"seal-128", ParamSet{218, 8192, 10, 1, 128}},
        {"compare-80", ParamSet{180, 4096, 10, 1, 80}},
        {"desk-16", ParamSet{40, 16, 4, 1, 0}},
        {"desk-64", ParamSet{64, 64, 10, 1, 0}},
        {"desk-mlp", ParamSet{64, 16, 24, 1, 0}},
    };
    return presets;
}

inline ParamSet preset(const std::string& name) {
    auto it = builtin_presets().find(name);
    if (it == builtin_presets().end()) throw std::invalid_argument("unknown parameter preset: " + name);
    return it->second;
}

}  // namespace pimhe
