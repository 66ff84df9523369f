#pragma once

// Central tolerance block. Every verification routine takes these (or a
// subset) so that CLI overrides land in one place and manifests can echo
// the effective values.

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pss {

struct Tolerances {
    double symbolic_zero = 1e-10;    // sampled confirmation of an identically-zero expression
    double seq_residual = 1e-10;     // structure-equation residual bound
    double nonzero_floor = 1e-8;     // strict-inequality conditions / sample genericity
    double lambda_const = 1e-12;     // proportionality-constant detection spread
    double gauss = 1e-12;            // |ac - b^2 + 1|
    double codazzi_symbolic = 1e-9;  // closed-form Codazzi residuals
    double codazzi_grid = 1e-4;      // gridded Codazzi residuals
    double structure_grid = 1e-4;    // gridded structure-equation residuals
    double mesh_metric_rel = 1e-4;   // first-fundamental-form relative mismatch
    double frame_drift = 1e-4;       // orthonormality drift abort threshold
    double path_defect = 1e-5;       // transposed-path disagreement at probes
    double curvature_band = 0.02;    // |K + 1| bound on interior vertices
    double foliation_closed = 1e-12; // mean-curvature deviation along lines, closed form
    double foliation_grid = 1e-6;    // same, gridded pipeline
    double obstruction_det = 1e-10;  // |det M| needed to certify inconsistency
    double strip_margin = 0.02;      // relative interior shrink for strip evaluations
    double chart_jacobian_floor = 0.3;  // |Delta12| needed for well-conditioned mesh FDs

    using Entry = std::pair<const char*, double Tolerances::*>;
    static const std::vector<Entry>& entries() {
        static const std::vector<Entry> table = {
            {"symbolic_zero", &Tolerances::symbolic_zero},
            {"seq_residual", &Tolerances::seq_residual},
            {"nonzero_floor", &Tolerances::nonzero_floor},
            {"lambda_const", &Tolerances::lambda_const},
            {"gauss", &Tolerances::gauss},
            {"codazzi_symbolic", &Tolerances::codazzi_symbolic},
            {"codazzi_grid", &Tolerances::codazzi_grid},
            {"structure_grid", &Tolerances::structure_grid},
            {"mesh_metric_rel", &Tolerances::mesh_metric_rel},
            {"frame_drift", &Tolerances::frame_drift},
            {"path_defect", &Tolerances::path_defect},
            {"curvature_band", &Tolerances::curvature_band},
            {"foliation_closed", &Tolerances::foliation_closed},
            {"foliation_grid", &Tolerances::foliation_grid},
            {"obstruction_det", &Tolerances::obstruction_det},
            {"strip_margin", &Tolerances::strip_margin},
            {"chart_jacobian_floor", &Tolerances::chart_jacobian_floor},
        };
        return table;
    }

    void set(const std::string& name, double value) {
        for (const auto& [key, member] : entries()) {
            if (name == key) {
                this->*member = value;
                return;
            }
        }
        throw std::invalid_argument("unknown tolerance name: " + name);
    }

    std::map<std::string, double> as_map() const {
        std::map<std::string, double> m;
        for (const auto& [key, member] : entries()) m[key] = this->*member;
        return m;
    }
};

}  // namespace pss
