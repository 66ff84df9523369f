#pragma once

// Candidate eta pseudo-spherical systems: the six coefficient functions
// f_ij of the associated 1-forms (f21 fixed to the constant eta), the
// necessary-and-sufficient structure-equation conditions, the five-group
// classification through the functions H and L, and the admissible
// evolution right-hand side.

#include <algorithm>
#include <array>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "pss/config.hpp"
#include "pss/expr.hpp"

namespace pss {

using expr::EvalOptions;
using expr::Expression;
using expr::JetPoint;

struct ClassificationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// system model

struct PssSystem {
    int k = 2;           // evolution order, >= 2
    double eta = 0.0;    // != 0
    double beta = 0.0;
    int sign = +1;       // the -/+ branch choice of the admissible family
    Expression f11, f12, f22, f31, f32;
    std::map<std::string, double> constants;  // user-declared named constants

    // f21 is the constant eta by definition of an eta pseudo-spherical system
    Expression f21() const { return Expression::symbol("eta"); }

    JetPoint base_point() const {
        JetPoint p;
        p.eta = eta;
        p.beta = beta;
        p.constants = constants;
        return p;
    }

    std::array<const Expression*, 5> coefficients() const { return {&f11, &f12, &f22, &f31, &f32}; }

    void validate() const {
        if (k < 2) throw std::invalid_argument("system order k must be >= 2");
        if (eta == 0.0) throw std::invalid_argument("eta must be nonzero");
        if (sign != 1 && sign != -1) throw std::invalid_argument("sign must be +1 or -1");
        static const char* names[] = {"f11", "f12", "f22", "f31", "f32"};
        int idx = 0;
        for (const Expression* f : coefficients()) {
            if (f->max_jet_order() > k)
                throw std::invalid_argument(std::string(names[idx]) + " references z" +
                                            std::to_string(f->max_jet_order()) +
                                            " beyond the system order k=" + std::to_string(k));
            // the coefficient functions live on jet space, not on (x, t)
            if (f->depends_on("x") || f->depends_on("t"))
                throw std::invalid_argument(std::string(names[idx]) +
                                            " may depend on jet variables only, not on x or t");
            ++idx;
        }
    }
};

// ---------------------------------------------------------------------------
// system spec files: `key = value` per line, `#` comments,
// `const <name> = <value>` for named constants

inline PssSystem parse_system(std::istream& in, const std::string& origin = "<stream>") {
    std::vector<std::pair<std::string, std::string>> kv;
    std::map<std::string, double> constants;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected `key = value`");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected `key = value`");
        if (key.rfind("const ", 0) == 0 || key.rfind("const\t", 0) == 0) {
            std::string name = trim(key.substr(6));
            constants[name] = std::stod(value);
        } else {
            kv.emplace_back(key, value);
        }
    }

    PssSystem sys;
    sys.constants = constants;
    std::set<std::string> const_names;
    for (const auto& [name, v] : constants) const_names.insert(name);

    std::set<std::string> seen;
    // k must be known before expressions can be order-checked; read scalars first
    for (const auto& [key, value] : kv) {
        if (key == "k") sys.k = std::stoi(value);
        else if (key == "eta") sys.eta = std::stod(value);
        else if (key == "beta") sys.beta = std::stod(value);
        else if (key == "sign") {
            if (value == "+" || value == "+1") sys.sign = +1;
            else if (value == "-" || value == "-1") sys.sign = -1;
            else throw std::runtime_error(origin + ": sign must be + or -");
        }
        seen.insert(key);
    }
    for (const auto& [key, value] : kv) {
        if (key == "f11") sys.f11 = expr::parse(value, sys.k, const_names);
        else if (key == "f12") sys.f12 = expr::parse(value, sys.k, const_names);
        else if (key == "f22") sys.f22 = expr::parse(value, sys.k, const_names);
        else if (key == "f31") sys.f31 = expr::parse(value, sys.k, const_names);
        else if (key == "f32") sys.f32 = expr::parse(value, sys.k, const_names);
        else if (key == "k" || key == "eta" || key == "beta" || key == "sign") continue;
        else throw std::runtime_error(origin + ": unknown key `" + key + "`");
    }
    for (const char* req : {"k", "eta", "f11", "f12", "f22", "f31", "f32"})
        if (!seen.count(req))
            throw std::runtime_error(origin + ": missing required key `" + std::string(req) + "`");
    sys.validate();
    return sys;
}

inline PssSystem load_system(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open system spec file: " + path);
    return parse_system(in, path);
}

// ---------------------------------------------------------------------------
// sampling

// Uniform jet points in [-2, 2]^dim, rejecting points where any guard
// expression hits a domain error or a denominator below the floor.
inline std::vector<JetPoint> make_jet_samples(const std::vector<Expression>& guards,
                                              const JetPoint& base, int jet_order, int count,
                                              unsigned seed, double denominator_floor = 1e-8) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    EvalOptions opt;
    opt.min_abs_denominator = denominator_floor;
    std::vector<JetPoint> out;
    out.reserve(count);
    int attempts = 0;
    while ((int)out.size() < count) {
        if (++attempts > 1000 * count)
            throw std::runtime_error("sample generation failed: guards reject nearly all points");
        JetPoint p = base;
        p.x = uni(rng);
        p.t = uni(rng);
        p.z.resize(jet_order + 1);
        for (double& zi : p.z) zi = uni(rng);
        bool ok = true;
        for (const Expression& g : guards) {
            try {
                (void)g.evaluate(p, opt);
            } catch (const expr::EvalError&) {
                ok = false;
                break;
            }
        }
        if (ok) out.push_back(std::move(p));
    }
    return out;
}

inline std::vector<JetPoint> make_jet_samples(const PssSystem& sys, int count, unsigned seed,
                                              int jet_order = -1) {
    if (jet_order < 0) jet_order = sys.k + 1;
    std::vector<Expression> guards = {sys.f11, sys.f12, sys.f22, sys.f31, sys.f32};
    return make_jet_samples(guards, sys.base_point(), jet_order, count, seed);
}

// ---------------------------------------------------------------------------
// identically-zero detection: literal zero after simplification, else
// confirmed by sampling (no full canonicalization is attempted)

enum class ZeroStatus { LiteralZero, SampledZero, NonZero };

inline ZeroStatus zero_status(const Expression& e, const std::vector<JetPoint>& samples,
                              double tol) {
    if (e.is_literal_zero()) return ZeroStatus::LiteralZero;
    double max_abs = 0.0;
    for (const JetPoint& p : samples) max_abs = std::max(max_abs, std::abs(e.evaluate(p)));
    return max_abs <= tol ? ZeroStatus::SampledZero : ZeroStatus::NonZero;
}

inline bool identically_zero(const Expression& e, const std::vector<JetPoint>& samples,
                             double tol) {
    return zero_status(e, samples, tol) != ZeroStatus::NonZero;
}

// ---------------------------------------------------------------------------
// classification functions and deltas

inline Expression H_expression(const PssSystem& sys) {
    return sys.f11 * sys.f11.diff("z0") - sys.f31 * sys.f31.diff("z0");
}
inline Expression L_expression(const PssSystem& sys) {
    return sys.f11 * sys.f31.diff("z0") - sys.f31 * sys.f11.diff("z0");
}

inline Expression delta12_expression(const PssSystem& sys) {
    return sys.f11 * sys.f22 - Expression::symbol("eta") * sys.f12;
}
inline Expression delta13_expression(const PssSystem& sys) {
    return sys.f11 * sys.f32 - sys.f31 * sys.f12;
}
inline Expression delta23_expression(const PssSystem& sys) {
    return Expression::symbol("eta") * sys.f32 - sys.f31 * sys.f22;
}

struct DeltaValues {
    double d12, d13, d23;
};

inline DeltaValues deltas(const PssSystem& sys, const JetPoint& p) {
    return {delta12_expression(sys).evaluate(p), delta13_expression(sys).evaluate(p),
            delta23_expression(sys).evaluate(p)};
}

// ---------------------------------------------------------------------------
// evolution right-hand side of the admissible family:
//   F = ( sum_{i=0}^{k-1} f12_{z_i} z_{i+1} - sign*(beta f11 - eta f12) ) / f11_{z_0}

inline Expression evolution_rhs(const PssSystem& sys) {
    const Expression f11_z0 = sys.f11.diff("z0");
    const Expression f12_zk1 = sys.f12.diff("z" + std::to_string(sys.k - 1));
    {
        auto probe = make_jet_samples({sys.f11, sys.f12}, sys.base_point(), sys.k + 1, 20, 9001u);
        if (identically_zero(f11_z0, probe, 1e-12))
            throw std::domain_error("evolution_rhs: f11_z0 = " + f11_z0.str() +
                                    " vanishes identically");
        if (identically_zero(f12_zk1, probe, 1e-12))
            throw std::domain_error("evolution_rhs: f12_z" + std::to_string(sys.k - 1) + " = " +
                                    f12_zk1.str() + " vanishes identically");
    }
    Expression numerator;
    for (int i = 0; i < sys.k; ++i)
        numerator = numerator + sys.f12.diff("z" + std::to_string(i)) * Expression::jet(i + 1);
    const Expression eta_s = Expression::symbol("eta");
    const Expression beta_s = Expression::symbol("beta");
    numerator = numerator - Expression::number(sys.sign) * (beta_s * sys.f11 - eta_s * sys.f12);
    return numerator / f11_z0;
}

// ---------------------------------------------------------------------------
// structure-equation residuals (the Lemma's three equations, moved to one side)

inline std::array<Expression, 3> structure_residual_expressions(const PssSystem& sys,
                                                                const Expression& F) {
    const Expression eta_s = Expression::symbol("eta");
    Expression s12, s22, s32;
    for (int i = 0; i < sys.k; ++i) {
        const Expression zi1 = Expression::jet(i + 1);
        s12 = s12 + sys.f12.diff("z" + std::to_string(i)) * zi1;
        s32 = s32 + sys.f32.diff("z" + std::to_string(i)) * zi1;
        if (i < sys.k - 1) s22 = s22 + sys.f22.diff("z" + std::to_string(i)) * zi1;
    }
    Expression r1 = sys.f11.diff("z0") * F - s12 - eta_s * sys.f32 + sys.f31 * sys.f22;
    Expression r2 = s22 - sys.f11 * sys.f32 + sys.f31 * sys.f12;
    Expression r3 = sys.f31.diff("z0") * F - s32 - eta_s * sys.f12 + sys.f11 * sys.f22;
    return {r1, r2, r3};
}

inline std::array<double, 3> structure_residuals(const PssSystem& sys, const Expression& F,
                                                 const JetPoint& p) {
    const auto rs = structure_residual_expressions(sys, F);
    return {rs[0].evaluate(p), rs[1].evaluate(p), rs[2].evaluate(p)};
}

// ---------------------------------------------------------------------------
// lemma check

enum class CondStatus { SymbolicPass, SampledPass, Fail };

struct ConditionResult {
    std::string name;
    CondStatus status = CondStatus::Fail;
    double magnitude = 0.0;  // max |residual| (equations) or extremal |value| (inequalities)
    std::optional<JetPoint> witness;
    std::string detail;
};

struct ConditionReport {
    std::vector<ConditionResult> conditions;

    bool passed() const {
        return std::all_of(conditions.begin(), conditions.end(),
                           [](const ConditionResult& c) { return c.status != CondStatus::Fail; });
    }

    std::string summary() const {
        std::ostringstream os;
        for (const auto& c : conditions) {
            os << (c.status == CondStatus::Fail           ? "[FAIL] "
                   : c.status == CondStatus::SymbolicPass ? "[pass/symbolic] "
                                                          : "[pass/sampled]  ")
               << c.name;
            os.setf(std::ios::scientific);
            os.precision(3);
            os << "  (" << c.magnitude << ")";
            if (!c.detail.empty()) os << "  " << c.detail;
            os << "\n";
        }
        return os.str();
    }
};

namespace detail {

// equation-style condition: expression must vanish identically
inline ConditionResult zero_condition(const std::string& name, const Expression& e,
                                      const std::vector<JetPoint>& samples, double tol) {
    ConditionResult r;
    r.name = name;
    if (e.is_literal_zero()) {
        r.status = CondStatus::SymbolicPass;
        return r;
    }
    double max_abs = 0.0;
    const JetPoint* worst = nullptr;
    for (const JetPoint& p : samples) {
        const double v = std::abs(e.evaluate(p));
        if (v >= max_abs) {
            max_abs = v;
            worst = &p;
        }
    }
    r.magnitude = max_abs;
    if (max_abs <= tol) {
        r.status = CondStatus::SampledPass;
    } else {
        r.status = CondStatus::Fail;
        if (worst) r.witness = *worst;
        r.detail = "expected 0, got " + std::to_string(max_abs) + " (expr: " + e.str() + ")";
    }
    return r;
}

// inequality-style condition: expression must stay away from zero at samples
inline ConditionResult nonzero_condition(const std::string& name, const Expression& e,
                                         const std::vector<JetPoint>& samples, double floor_) {
    ConditionResult r;
    r.name = name;
    double min_abs = std::numeric_limits<double>::infinity();
    const JetPoint* worst = nullptr;
    for (const JetPoint& p : samples) {
        const double v = std::abs(e.evaluate(p));
        if (v <= min_abs) {
            min_abs = v;
            worst = &p;
        }
    }
    r.magnitude = min_abs;
    if (min_abs > floor_) {
        r.status = CondStatus::SampledPass;  // open condition: sampled only, never symbolic
    } else {
        r.status = CondStatus::Fail;
        if (worst) r.witness = *worst;
        r.detail = "vanishes at a sample (expr: " + e.str() + ")";
    }
    return r;
}

}  // namespace detail

// Checks (std1), (std2), (std7), (SEq1n)-(SEq3n) and the Delta12 != 0
// condition. The derivative conditions are symbolic (they must simplify to
// the literal 0, with sampling as fallback confirmation); the inequalities
// and residuals are evaluated at every sample.
inline ConditionReport lemma_check(const PssSystem& sys, const std::vector<JetPoint>& samples,
                                   const Tolerances& tol = {},
                                   const std::optional<Expression>& rhs = std::nullopt) {
    if (samples.empty()) throw std::invalid_argument("lemma_check: samples must be non-empty");
    sys.validate();
    for (const JetPoint& p : samples)
        if ((int)p.z.size() < sys.k + 1)
            throw std::invalid_argument("lemma_check: sample jet order below k");

    ConditionReport report;
    auto zero = [&](const std::string& name, const Expression& e) {
        report.conditions.push_back(detail::zero_condition(name, e, samples, tol.symbolic_zero));
    };

    // (std1): f11 and f31 depend at most on z0
    for (int i = 1; i <= sys.k; ++i) zero("std1: f11_z" + std::to_string(i) + " = 0", sys.f11.diff("z" + std::to_string(i)));
    for (int i = 1; i <= sys.k; ++i) zero("std1: f31_z" + std::to_string(i) + " = 0", sys.f31.diff("z" + std::to_string(i)));
    // (std2): f12, f32 free of z_k; f22 free of z_{k-1}, z_k
    zero("std2: f12_z" + std::to_string(sys.k) + " = 0", sys.f12.diff("z" + std::to_string(sys.k)));
    zero("std2: f22_z" + std::to_string(sys.k) + " = 0", sys.f22.diff("z" + std::to_string(sys.k)));
    zero("std2: f22_z" + std::to_string(sys.k - 1) + " = 0", sys.f22.diff("z" + std::to_string(sys.k - 1)));
    zero("std2: f32_z" + std::to_string(sys.k) + " = 0", sys.f32.diff("z" + std::to_string(sys.k)));

    // (std7): f11_z0^2 + f31_z0^2 != 0
    const Expression f11_z0 = sys.f11.diff("z0");
    const Expression f31_z0 = sys.f31.diff("z0");
    report.conditions.push_back(detail::nonzero_condition(
        "std7: f11_z0^2 + f31_z0^2 != 0", f11_z0 * f11_z0 + f31_z0 * f31_z0, samples,
        tol.nonzero_floor));

    // (Delta12): f11 f22 - eta f12 != 0
    report.conditions.push_back(detail::nonzero_condition("Delta12 != 0", delta12_expression(sys),
                                                          samples, tol.nonzero_floor));

    // (SEq1n)-(SEq3n) against the system's evolution RHS. When f11_z0
    // vanishes identically the RHS is recovered from (SEq3n) instead.
    std::optional<Expression> F = rhs;
    std::string f_origin = "supplied F";
    if (!F) {
        try {
            F = evolution_rhs(sys);
            f_origin = "F = evolution_rhs";
        } catch (const std::domain_error&) {
            if (!identically_zero(f31_z0, samples, 1e-12)) {
                Expression s32;
                for (int i = 0; i < sys.k; ++i)
                    s32 = s32 + sys.f32.diff("z" + std::to_string(i)) * Expression::jet(i + 1);
                F = (s32 + Expression::symbol("eta") * sys.f12 - sys.f11 * sys.f22) / f31_z0;
                f_origin = "F solved from SEq3n";
            }
        }
    }
    if (F) {
        const auto rs = structure_residual_expressions(sys, *F);
        const char* names[3] = {"SEq1n residual = 0", "SEq2n residual = 0", "SEq3n residual = 0"};
        for (int i = 0; i < 3; ++i) {
            auto c = detail::zero_condition(names[i], rs[i], samples, tol.seq_residual);
            c.detail = c.detail.empty() ? f_origin : c.detail + "; " + f_origin;
            report.conditions.push_back(std::move(c));
        }
    } else {
        ConditionResult c;
        c.name = "SEq residuals";
        c.status = CondStatus::Fail;
        c.detail = "no evolution RHS derivable: f11_z0 and f31_z0 both vanish";
        c.witness = samples.front();
        report.conditions.push_back(std::move(c));
    }
    return report;
}

// ---------------------------------------------------------------------------
// classification into the five groups through H and L

struct GroupLabel {
    enum class Group { I, II, III, IV, V };
    enum class Vanishing { None, F11, F31 };

    Group group = Group::I;
    std::optional<double> lambda;  // groups I, II: f31 = lambda * f11
    std::optional<double> C;       // group IV: f31^2 - f11^2 = C
    Vanishing vanishing = Vanishing::None;  // group III

    std::string name() const {
        switch (group) {
            case Group::I: return "I";
            case Group::II: return "II";
            case Group::III: return "III";
            case Group::IV: return "IV";
            case Group::V: return "V";
        }
        return "?";
    }

    std::string describe() const {
        std::ostringstream os;
        os << "group " << name();
        if (lambda) os << " (f31 = " << *lambda << " * f11)";
        if (C) os << " (f31^2 - f11^2 = " << *C << ")";
        if (vanishing == Vanishing::F11) os << " (f11 = 0)";
        if (vanishing == Vanishing::F31) os << " (f31 = 0)";
        return os.str();
    }
};

inline GroupLabel classify(const PssSystem& sys, const std::vector<JetPoint>& samples,
                           const Tolerances& tol = {}) {
    if (samples.empty()) throw std::invalid_argument("classify: samples must be non-empty");

    const Expression f11_z0 = sys.f11.diff("z0");
    const Expression f31_z0 = sys.f31.diff("z0");

    const bool f11_zero = identically_zero(sys.f11, samples, tol.symbolic_zero);
    const bool f31_zero = identically_zero(sys.f31, samples, tol.symbolic_zero);
    if (f11_zero && f31_zero)
        throw ClassificationError("both f11 and f31 vanish identically (std7 cannot hold)");
    if (f11_zero || f31_zero) {
        const Expression& other_z0 = f11_zero ? f31_z0 : f11_z0;
        double min_abs = std::numeric_limits<double>::infinity();
        for (const JetPoint& p : samples) min_abs = std::min(min_abs, std::abs(other_z0.evaluate(p)));
        if (min_abs <= tol.nonzero_floor)
            throw ClassificationError(
                "one of f11, f31 vanishes but the other has vanishing z0-derivative at samples");
        GroupLabel label;
        label.group = GroupLabel::Group::III;
        label.vanishing = f11_zero ? GroupLabel::Vanishing::F11 : GroupLabel::Vanishing::F31;
        return label;
    }

    // L = 0 branch: detect f31 = lambda f11 by sampling the ratio, then
    // confirm on a fresh batch (pure symbolic proportionality detection is
    // undecidable in general)
    {
        std::vector<double> ratios;
        for (const JetPoint& p : samples) {
            const double v11 = sys.f11.evaluate(p);
            if (std::abs(v11) > tol.nonzero_floor) ratios.push_back(sys.f31.evaluate(p) / v11);
            if (ratios.size() == 10) break;
        }
        if (ratios.size() >= 3) {
            const auto [mn, mx] = std::minmax_element(ratios.begin(), ratios.end());
            const double lambda = ratios.front();
            const double spread = *mx - *mn;
            if (spread <= tol.lambda_const * std::max(1.0, std::abs(lambda))) {
                const Expression g = sys.f31 - Expression::number(lambda) * sys.f11;
                auto confirm = make_jet_samples({sys.f11, sys.f31}, sys.base_point(), sys.k + 1,
                                                100, 777u);
                double scale = 1.0;
                for (const JetPoint& p : confirm) scale = std::max(scale, std::abs(sys.f31.evaluate(p)));
                if (identically_zero(g, confirm, tol.symbolic_zero * scale)) {
                    GroupLabel label;
                    label.lambda = lambda;
                    label.group = std::abs(lambda * lambda - 1.0) <= 1e-9 ? GroupLabel::Group::I
                                                                          : GroupLabel::Group::II;
                    return label;
                }
            }
        }
    }

    const Expression H = H_expression(sys);
    const Expression L = L_expression(sys);

    // H = 0 branch: f31^2 - f11^2 constant
    if (identically_zero(H, samples, tol.symbolic_zero)) {
        const Expression csq = sys.f31 * sys.f31 - sys.f11 * sys.f11;
        double cmin = std::numeric_limits<double>::infinity(), cmax = -cmin;
        double lmin = std::numeric_limits<double>::infinity();
        for (const JetPoint& p : samples) {
            const double v = csq.evaluate(p);
            cmin = std::min(cmin, v);
            cmax = std::max(cmax, v);
            lmin = std::min(lmin, std::abs(L.evaluate(p)));
        }
        const double C = 0.5 * (cmin + cmax);
        if (cmax - cmin > 1e-9 * std::max(1.0, std::abs(C)))
            throw ClassificationError("H vanishes at samples but f31^2 - f11^2 is not constant");
        if (std::abs(C) <= tol.nonzero_floor)
            throw ClassificationError("f31^2 - f11^2 = 0 with H = 0: degenerate (lambda^2 = 1 case missed?)");
        if (lmin <= tol.nonzero_floor)
            throw ClassificationError("H = 0 but L vanishes at a sample: ambiguous");
        GroupLabel label;
        label.group = GroupLabel::Group::IV;
        label.C = C;
        return label;
    }

    // generic branch: HL != 0 at every sample
    double hmin = std::numeric_limits<double>::infinity();
    double lmin = std::numeric_limits<double>::infinity();
    for (const JetPoint& p : samples) {
        hmin = std::min(hmin, std::abs(H.evaluate(p)));
        lmin = std::min(lmin, std::abs(L.evaluate(p)));
    }
    if (hmin > tol.nonzero_floor && lmin > tol.nonzero_floor) {
        GroupLabel label;
        label.group = GroupLabel::Group::V;
        return label;
    }
    throw ClassificationError(
        "H or L vanishes at some samples without vanishing identically: classification ambiguous");
}

}  // namespace pss
