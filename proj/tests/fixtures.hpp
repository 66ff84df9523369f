#pragma once

// Shared test fixtures: the classifier pairs (f11, f31) completed with
// generic remaining coefficients, and the admissible-family systems.

#include <string>

#include "pss/system.hpp"

namespace fixtures {

inline pss::PssSystem make(const std::string& f11, const std::string& f12,
                           const std::string& f22, const std::string& f31,
                           const std::string& f32, double eta = 2.0, double beta = 3.0,
                           int sign = +1, int k = 2) {
    pss::PssSystem sys;
    sys.k = k;
    sys.eta = eta;
    sys.beta = beta;
    sys.sign = sign;
    sys.f11 = pss::expr::parse(f11, k);
    sys.f12 = pss::expr::parse(f12, k);
    sys.f22 = pss::expr::parse(f22, k);
    sys.f31 = pss::expr::parse(f31, k);
    sys.f32 = pss::expr::parse(f32, k);
    return sys;
}

// group-I fixture: F = z2 + eta z1 - beta z0
inline pss::PssSystem group1() { return make("u", "z1", "beta", "u", "z1"); }
// lambda = -1 branch
inline pss::PssSystem group1_minus() { return make("u", "z1", "beta", "-u", "-z1", 2.0, 3.0, -1); }
// nonlinear admissible-family variants
inline pss::PssSystem group1_cubic() { return make("u", "z1^3/3", "beta", "u", "z1^3/3"); }
inline pss::PssSystem group1_exp() { return make("exp(u)", "z1", "beta", "exp(u)", "z1"); }

inline pss::PssSystem group2() { return make("u", "z1", "beta", "2*u", "2*z1"); }
inline pss::PssSystem group3() { return make("0", "z1", "beta", "u", "z1"); }
inline pss::PssSystem group4() { return make("sinh(u)", "z1", "beta", "cosh(u)", "z1"); }
inline pss::PssSystem group5() { return make("u", "z1", "beta", "u^2", "z1", 1.0); }

inline std::string dir() { return PSS_FIXTURE_DIR; }

}  // namespace fixtures
