#pragma once

// Nonexistence certificates for groups II-V: the proof-terminal 2x2 linear
// systems M (a-c, 2b)^T = 0. A nonzero determinant at a generic jet point
// forces a - c = b = 0, and then ac - b^2 = a^2 >= 0 cannot equal -1.

#include <sstream>

#include "pss/system.hpp"

namespace pss::obstruction {

using expr::Expression;
using expr::JetPoint;

struct Matrix2 {
    double m00 = 0, m01 = 0, m10 = 0, m11 = 0;
    double det() const { return m00 * m11 - m01 * m10; }
};

struct DegeneratePointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Terminal matrix of the group's proof, evaluated at p.
//   II, III (and the V branch with f12_{z_{k-1}} = 0):  [ eta  -f11 ; f11  eta ]
//   IV:  [ -eta L   -C f31_z0 ; C f31_z0   -eta L ]
//   V (f12_{z_{k-1}} != 0):
//       [ eta (f31_z0/f11_z0)_z0   -(L/f11_z0)_z0 ; (L/f11_z0)_z0   eta (f31_z0/f11_z0)_z0 ]
inline Matrix2 obstruction_matrix(const PssSystem& sys, const GroupLabel& label,
                                  const JetPoint& p, double nonzero_floor = 1e-8) {
    switch (label.group) {
        case GroupLabel::Group::I:
            throw std::invalid_argument(
                "group I is the consistent family; use the immersion module instead");
        case GroupLabel::Group::II:
        case GroupLabel::Group::III: {
            if (label.group == GroupLabel::Group::II &&
                std::abs(sys.f11.evaluate(p)) <= nonzero_floor)
                throw DegeneratePointError("group II requires f11 != 0 at the sample");
            if (label.group == GroupLabel::Group::III) {
                const Expression& nonvanishing =
                    label.vanishing == GroupLabel::Vanishing::F11 ? sys.f31 : sys.f11;
                if (std::abs(nonvanishing.evaluate(p)) <= nonzero_floor)
                    throw DegeneratePointError("group III sample is degenerate");
            }
            const double f11 = sys.f11.evaluate(p);
            return {p.eta, -f11, f11, p.eta};
        }
        case GroupLabel::Group::IV: {
            if (!label.C) throw std::invalid_argument("group IV label carries no constant C");
            const double L = L_expression(sys).evaluate(p);
            const double f31_z0 = sys.f31.diff("z0").evaluate(p);
            if (std::abs(L) <= nonzero_floor && std::abs(f31_z0) <= nonzero_floor)
                throw DegeneratePointError("group IV sample is degenerate (L = f31_z0 = 0)");
            const double C = *label.C;
            return {-p.eta * L, -C * f31_z0, C * f31_z0, -p.eta * L};
        }
        case GroupLabel::Group::V: {
            const Expression f12_zk1 = sys.f12.diff("z" + std::to_string(sys.k - 1));
            double branch_probe;
            try {
                branch_probe = f12_zk1.evaluate(p);
            } catch (const expr::EvalError& e) {
                throw DegeneratePointError(e.what());
            }
            if (std::abs(branch_probe) <= nonzero_floor) {
                // terminal branch: same matrix as groups II/III
                const double f11 = sys.f11.evaluate(p);
                return {p.eta, -f11, f11, p.eta};
            }
            const Expression f11_z0 = sys.f11.diff("z0");
            const Expression ratio = (sys.f31.diff("z0") / f11_z0).diff("z0");
            const Expression lrat = (L_expression(sys) / f11_z0).diff("z0");
            try {
                const double A = p.eta * ratio.evaluate(p);
                const double B = lrat.evaluate(p);
                return {A, -B, B, A};
            } catch (const expr::EvalError& e) {
                throw DegeneratePointError(e.what());
            }
        }
    }
    throw std::logic_error("unreachable");
}

struct ObstructionWitness {
    GroupLabel group;
    Matrix2 matrix;
    JetPoint point;
    double det = 0.0;
    enum class Conclusion { Inconsistent, Inconclusive } conclusion = Conclusion::Inconclusive;

    std::string to_text() const {
        std::ostringstream os;
        os.precision(12);
        os << "{\n  \"group\": \"" << group.name() << "\",\n";
        os << "  \"matrix\": [[" << matrix.m00 << ", " << matrix.m01 << "], [" << matrix.m10
           << ", " << matrix.m11 << "]],\n";
        os << "  \"determinant\": " << det << ",\n";
        os << "  \"point\": {\"x\": " << point.x << ", \"t\": " << point.t;
        for (std::size_t i = 0; i < point.z.size(); ++i) os << ", \"z" << i << "\": " << point.z[i];
        os << ", \"eta\": " << point.eta << ", \"beta\": " << point.beta << "},\n";
        os << "  \"conclusion\": \""
           << (conclusion == Conclusion::Inconsistent ? "inconsistent" : "inconclusive")
           << "\"\n}";
        return os.str();
    }
};

// Certifies inconsistency of Codazzi + Gauss for groups II-V: a sample with
// |det M| above tolerance forces a - c = b = 0 against ac - b^2 = -1.
// Degenerate samples yield "inconclusive", never "consistent".
inline ObstructionWitness verify_inconsistency(const PssSystem& sys,
                                               const std::vector<JetPoint>& samples,
                                               const Tolerances& tol = {}) {
    const GroupLabel label = classify(sys, samples, tol);
    if (label.group == GroupLabel::Group::I)
        throw std::invalid_argument(
            "verify_inconsistency: group I admits the universal immersion; "
            "use the immersion module");
    ObstructionWitness witness;
    witness.group = label;
    for (const JetPoint& p : samples) {
        Matrix2 m;
        try {
            m = obstruction_matrix(sys, label, p, tol.nonzero_floor);
        } catch (const DegeneratePointError&) {
            continue;
        }
        const double d = m.det();
        if (std::abs(d) > std::abs(witness.det)) {
            witness.matrix = m;
            witness.det = d;
            witness.point = p;
        }
        if (std::abs(d) > tol.obstruction_det)
            witness.conclusion = ObstructionWitness::Conclusion::Inconsistent;
    }
    return witness;
}

}  // namespace pss::obstruction
