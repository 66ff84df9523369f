#pragma once

// Command-line orchestration: file-based pipelines over the library
// (system spec -> check/classify/rhs, solve -> CSV, immerse -> OBJ +
// diagnostics, probe -> witness). Every run writes a manifest echoing the
// effective parameters, tolerances and seed.

#include <filesystem>
#include <fstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pss/immersion.hpp"
#include "pss/obstruction.hpp"
#include "pss/solver.hpp"

namespace pss::cli {

// exit codes
enum ExitCode : int {
    kOk = 0,
    kCheckFailed = 1,
    kUsage = 2,
    kAmbiguous = 3,
    kUnstable = 4,
    kStripMiss = 5,
};

struct Options {
    std::string spec;
    std::string out = "out";
    unsigned seed = 1;
    std::vector<std::string> tol;
    int samples = 100;

    // grid
    double xmin = 0.0;
    double xmax = 6.283185307179586;
    int nx = 512;
    bool dirichlet = false;
    std::string u0 = "sin(x)";

    // stepper
    double dt = 1e-4;
    double tend = 0.012;
    int store_every = 1;
    int stencil = 4;

    // immersion
    double l = 3.0;
    double gamma = 0.2;
    std::string abc_sign = "auto";
    double margin = 0.25;
    std::string solution_csv;
    std::vector<double> deltas;
};

inline Tolerances parse_tolerances(const Options& opt) {
    Tolerances tol;
    tol.strip_margin = opt.margin;
    for (const std::string& kv : opt.tol) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--tol expects NAME=VALUE, got: " + kv);
        tol.set(kv.substr(0, eq), std::stod(kv.substr(eq + 1)));
    }
    return tol;
}

inline void write_manifest(const Options& opt, const std::string& command,
                           const Tolerances& tol, nlohmann::json extra = {}) {
    std::filesystem::create_directories(opt.out);
    nlohmann::json m;
    m["command"] = command;
    m["spec"] = opt.spec;
    m["seed"] = opt.seed;
    m["samples"] = opt.samples;
    m["grid"] = {{"xmin", opt.xmin},
                 {"xmax", opt.xmax},
                 {"nx", opt.nx},
                 {"boundary", opt.dirichlet ? "dirichlet" : "periodic"},
                 {"u0", opt.u0}};
    m["stepper"] = {{"dt", opt.dt},
                    {"t_end", opt.tend},
                    {"store_every", opt.store_every},
                    {"stencil", opt.stencil}};
    m["immersion"] = {{"l", opt.l},
                      {"gamma", opt.gamma},
                      {"abc_sign", opt.abc_sign},
                      {"margin", opt.margin}};
    m["tolerances"] = tol.as_map();
    if (!extra.is_null()) m["result"] = std::move(extra);
    std::ofstream f(std::filesystem::path(opt.out) / "manifest.json");
    f << m.dump(2) << "\n";
}

// ---------------------------------------------------------------------------

inline int cmd_check(const Options& opt) {
    const Tolerances tol = parse_tolerances(opt);
    const PssSystem sys = load_system(opt.spec);
    const auto samples = make_jet_samples(sys, opt.samples, opt.seed);
    const ConditionReport report = lemma_check(sys, samples, tol);
    std::filesystem::create_directories(opt.out);
    {
        std::ofstream f(std::filesystem::path(opt.out) / "check_report.txt");
        f << report.summary();
    }
    std::cout << report.summary();
    write_manifest(opt, "check", tol, {{"passed", report.passed()}});
    return report.passed() ? kOk : kCheckFailed;
}

inline int cmd_classify(const Options& opt) {
    const Tolerances tol = parse_tolerances(opt);
    const PssSystem sys = load_system(opt.spec);
    const auto samples = make_jet_samples(sys, opt.samples, opt.seed);
    try {
        const GroupLabel label = classify(sys, samples, tol);
        std::cout << label.describe() << "\n";
        write_manifest(opt, "classify", tol, {{"group", label.name()}});
        return kOk;
    } catch (const ClassificationError& e) {
        std::cerr << "classification ambiguous: " << e.what() << "\n";
        write_manifest(opt, "classify", tol, {{"group", "ambiguous"}, {"error", e.what()}});
        return kAmbiguous;
    }
}

inline int cmd_rhs(const Options& opt) {
    const Tolerances tol = parse_tolerances(opt);
    const PssSystem sys = load_system(opt.spec);
    const expr::Expression F = evolution_rhs(sys);
    std::cout << "z0_t = " << F.str() << "\n";
    write_manifest(opt, "rhs", tol, {{"rhs", F.str()}});
    return kOk;
}

inline int cmd_solve(const Options& opt) {
    const Tolerances tol = parse_tolerances(opt);
    const PssSystem sys = load_system(opt.spec);

    solver::Grid grid;
    grid.x_min = opt.xmin;
    grid.x_max = opt.xmax;
    grid.nx = opt.nx;
    const expr::Expression u0 = expr::parse(opt.u0, 0);
    auto u0_fn = [&](double x) {
        expr::JetPoint q = sys.base_point();
        q.x = x;
        return u0.evaluate(q);
    };
    if (opt.dirichlet) {
        grid.boundary = solver::Grid::Boundary::Dirichlet;
        const double lv = u0_fn(opt.xmin), rv = u0_fn(opt.xmax);
        grid.left_value = [lv](double) { return lv; };
        grid.right_value = [rv](double) { return rv; };
    }
    solver::StepperConfig cfg;
    cfg.dt = opt.dt;
    cfg.t_end = opt.tend;
    cfg.store_every = opt.store_every;
    cfg.jet_stencil_order = opt.stencil;

    try {
        const auto field = solver::solve(sys, u0_fn, grid, cfg);
        std::filesystem::create_directories(opt.out);
        std::ofstream csv(std::filesystem::path(opt.out) / "solution.csv");
        solver::write_csv(field, csv);
        double max_res = 0.0;
        for (double r : field.max_structure_residual) max_res = std::max(max_res, r);
        std::cout << "stored " << field.times.size() << " frames to " << opt.out
                  << "/solution.csv; max structure residual " << max_res << "\n";
        write_manifest(opt, "solve", tol,
                       {{"frames", field.times.size()}, {"max_structure_residual", max_res}});
        return max_res <= tol.structure_grid ? kOk : kCheckFailed;
    } catch (const solver::SolverAbort& e) {
        std::cerr << e.what() << "\n";
        write_manifest(opt, "solve", tol, {{"aborted_at", e.t_last}});
        return kUnstable;
    }
}

// ---------------------------------------------------------------------------
// immersion pipeline

namespace detail {

struct ImmersionResult {
    immersion::SurfaceMesh mesh;
    immersion::AbcGrids abc;
    immersion::Array2D K;
    immersion::FoliationReport foliation;
    double gauss_max = 0.0;
    double codazzi_max = 0.0;
    double k_min = 0.0, k_max = 0.0;  // over interior vertices (>= 3 cells in)
    int abc_sign = +1;
    std::pair<double, double> window;  // signed-combination range of the mesh
};

// Select the x-columns and stored frames whose signed combination stays in
// the strip interior, evaluate the closed form and the system coefficients
// there, and reconstruct the surface.
inline ImmersionResult build_immersion(const PssSystem& sys, const solver::SolutionField& field,
                                       const immersion::ClosedForm& cf, const Tolerances& tol) {
    using immersion::Array2D;
    const auto bounds = immersion::strip_bounds(cf.l, cf.gamma);
    const auto [wlo, whi] = bounds.interior(tol.strip_margin);

    // uniform time levels (drop a trailing fractional frame if present)
    std::vector<int> frames;
    for (std::size_t i = 0; i < field.times.size(); ++i) frames.push_back((int)i);
    if (frames.size() >= 3) {
        const double ht0 = field.times[1] - field.times[0];
        while (frames.size() >= 3) {
            const double last =
                field.times[frames[frames.size() - 1]] - field.times[frames[frames.size() - 2]];
            if (std::abs(last - ht0) < 1e-12 * std::max(1.0, std::abs(ht0))) break;
            frames.pop_back();
        }
    }
    if (frames.size() < 4) throw std::runtime_error("immersion needs >= 4 uniform time levels");
    std::vector<double> ts;
    for (int fi : frames) ts.push_back(field.times[fi]);

    // x-columns whose w = sign*(eta x + beta t) is interior for every stored
    // t and whose chart Jacobian Delta12 (the omega1 ^ omega2 coefficient)
    // stays away from zero, so that the (x, t) chart is nondegenerate
    std::vector<int> cols;
    expr::JetPoint jac = sys.base_point();
    const Expression delta12 = delta12_expression(sys);
    for (int i = 0; i < field.grid.nx; ++i) {
        const double x = field.grid.x(i);
        bool ok = true;
        for (std::size_t fi = 0; fi < frames.size() && ok; ++fi) {
            const double t = ts[fi];
            const double w = cf.sign * (sys.eta * x + sys.beta * t);
            if (w <= wlo || w >= whi) ok = false;
            if (ok) {
                jac.x = x;
                jac.t = t;
                jac.z.assign(field.k + 1, 0.0);
                jac.z[0] = field.u[frames[fi]][i];
                for (int j = 0; j < field.k; ++j) jac.z[j + 1] = field.jets[frames[fi]][j][i];
                if (std::abs(delta12.evaluate(jac)) < tol.chart_jacobian_floor) ok = false;
            }
        }
        if (ok)
            cols.push_back(i);
        else if (!cols.empty())
            break;  // keep the first contiguous run
    }
    if ((int)cols.size() < 4) {
        std::ostringstream os;
        os << "strip (" << bounds.lower << ", " << bounds.upper << ") with margin "
           << tol.strip_margin << " misses the solution domain";
        throw immersion::OutsideStripError(bounds, wlo);
    }

    const int nt = (int)ts.size(), nx = (int)cols.size();
    std::vector<double> xs;
    for (int c : cols) xs.push_back(field.grid.x(c));

    // form and abc grids along the solution
    immersion::FormGrids fg{Array2D(nt, nx), Array2D(nt, nx), Array2D(nt, nx),
                            Array2D(nt, nx), Array2D(nt, nx), Array2D(nt, nx)};
    immersion::AbcGrids abc{Array2D(nt, nx), Array2D(nt, nx), Array2D(nt, nx)};
    expr::JetPoint q = sys.base_point();
    double gauss_max = 0.0;
    double wmin = std::numeric_limits<double>::infinity(), wmax = -wmin;
    for (int it = 0; it < nt; ++it) {
        const int fi = frames[it];
        for (int ix = 0; ix < nx; ++ix) {
            const int ci = cols[ix];
            q.x = xs[ix];
            q.t = ts[it];
            q.z.assign(field.k + 1, 0.0);
            q.z[0] = field.u[fi][ci];
            for (int j = 0; j < field.k; ++j) q.z[j + 1] = field.jets[fi][j][ci];
            fg.f11(it, ix) = sys.f11.evaluate(q);
            fg.f12(it, ix) = sys.f12.evaluate(q);
            fg.f21(it, ix) = sys.eta;
            fg.f22(it, ix) = sys.f22.evaluate(q);
            fg.f31(it, ix) = sys.f31.evaluate(q);
            fg.f32(it, ix) = sys.f32.evaluate(q);
            const double s = sys.eta * q.x + sys.beta * q.t;
            wmin = std::min(wmin, (double)cf.sign * s);
            wmax = std::max(wmax, (double)cf.sign * s);
            const auto v = immersion::universal_abc(cf, s);
            abc.a(it, ix) = v.a;
            abc.b(it, ix) = v.b;
            abc.c(it, ix) = v.c;
            gauss_max = std::max(gauss_max, std::abs(immersion::gauss_residual(v)));
        }
    }

    ImmersionResult res;
    res.abc_sign = cf.sign;
    res.gauss_max = gauss_max;
    res.window = {wmin, wmax};

    // Codazzi residuals through the closed-form derivatives (exact in x, t;
    // the only noise is the finite-difference jets feeding the f_ij)
    {
        const auto abc_exprs = immersion::closed_form_abc_expressions(cf);
        expr::JetPoint q2 = sys.base_point();
        const int stride_t = std::max(1, nt / 16), stride_x = std::max(1, nx / 16);
        for (int it = 0; it < nt; it += stride_t)
            for (int ix = 0; ix < nx; ix += stride_x) {
                q2.x = xs[ix];
                q2.t = ts[it];
                q2.z.assign(field.k + 1, 0.0);
                q2.z[0] = field.u[frames[it]][cols[ix]];
                for (int j = 0; j < field.k; ++j) q2.z[j + 1] = field.jets[frames[it]][j][cols[ix]];
                const auto [r1, r2] = immersion::codazzi_residuals_symbolic(
                    sys, abc_exprs[0], abc_exprs[1], abc_exprs[2], q2);
                res.codazzi_max = std::max({res.codazzi_max, std::abs(r1), std::abs(r2)});
            }
    }

    const auto w = immersion::assemble_coefficients(fg, abc);
    res.mesh = immersion::frame_integrate(w, xs, ts, immersion::FrameState{}, 0, 0, tol);
    res.K = immersion::gaussian_curvature_mesh(res.mesh);

    res.k_min = std::numeric_limits<double>::infinity();
    res.k_max = -res.k_min;
    for (int it = 3; it < nt - 3; ++it)
        for (int ix = 3; ix < nx - 3; ++ix) {
            res.k_min = std::min(res.k_min, res.K(it, ix));
            res.k_max = std::max(res.k_max, res.K(it, ix));
        }

    // mean-curvature foliation along default lines spanning the mesh window
    Array2D H(nt, nx);
    for (int it = 0; it < nt; ++it)
        for (int ix = 0; ix < nx; ++ix)
            H(it, ix) = immersion::mean_curvature(abc.a(it, ix), abc.b(it, ix), abc.c(it, ix));
    std::vector<double> deltas;
    for (int j = 1; j <= 5; ++j) {
        const double frac = 0.2 + 0.6 * (j - 1) / 4.0;
        deltas.push_back(cf.sign * (wmin + frac * (wmax - wmin)));
    }
    res.foliation = immersion::foliation_report(H, xs, ts, sys.eta, sys.beta, deltas);
    res.abc = std::move(abc);
    return res;
}

}  // namespace detail

inline int cmd_immerse(const Options& opt) {
    const Tolerances tol = parse_tolerances(opt);
    const PssSystem sys = load_system(opt.spec);

    // the universal closed form applies to the admissible (group I) family
    {
        const auto samples = make_jet_samples(sys, opt.samples, opt.seed);
        GroupLabel label;
        try {
            label = classify(sys, samples, tol);
        } catch (const ClassificationError& e) {
            std::cerr << "classification ambiguous: " << e.what() << "\n";
            return kAmbiguous;
        }
        if (label.group != GroupLabel::Group::I) {
            std::cerr << "system is in " << label.describe()
                      << "; no finite-order immersion exists (run `probe` for the witness)\n";
            return kCheckFailed;
        }
    }

    immersion::ClosedForm cf;
    cf.l = opt.l;
    cf.gamma = opt.gamma;
    if (opt.abc_sign == "auto") {
        const auto sel = immersion::select_abc_sign(sys, opt.l, opt.gamma, 50, opt.seed, tol);
        cf.sign = sel.abc_sign;
        std::cout << "sign pairing: abc sign " << (cf.sign > 0 ? "+" : "-")
                  << " (residual " << sel.selected_max << " vs " << sel.rejected_max << ")\n";
    } else {
        cf.sign = opt.abc_sign == "-" ? -1 : +1;
    }
    cf.validate();

    // solution: from CSV or a fresh solve
    solver::SolutionField field;
    if (!opt.solution_csv.empty()) {
        std::ifstream csv(opt.solution_csv);
        if (!csv) {
            std::cerr << "cannot open solution CSV: " << opt.solution_csv << "\n";
            return kUsage;
        }
        field = solver::read_csv(csv);
    } else {
        solver::Grid grid;
        grid.x_min = opt.xmin;
        grid.x_max = opt.xmax;
        grid.nx = opt.nx;
        const expr::Expression u0 = expr::parse(opt.u0, 0);
        auto u0_fn = [&](double x) {
            expr::JetPoint q = sys.base_point();
            q.x = x;
            return u0.evaluate(q);
        };
        solver::StepperConfig cfg;
        cfg.dt = opt.dt;
        cfg.t_end = opt.tend;
        cfg.store_every = opt.store_every;
        cfg.jet_stencil_order = opt.stencil;
        try {
            field = solver::solve(sys, u0_fn, grid, cfg);
        } catch (const solver::SolverAbort& e) {
            std::cerr << e.what() << "\n";
            return kUnstable;
        }
    }

    detail::ImmersionResult res;
    try {
        res = detail::build_immersion(sys, field, cf, tol);
    } catch (const immersion::OutsideStripError& e) {
        std::cerr << e.what() << "\n";
        write_manifest(opt, "immerse", tol, {{"error", e.what()}});
        return kStripMiss;
    } catch (const immersion::FrameDriftError& e) {
        std::cerr << e.what() << "\n";
        return kCheckFailed;
    }

    std::filesystem::create_directories(opt.out);
    {
        std::ofstream obj(std::filesystem::path(opt.out) / "mesh.obj");
        immersion::write_obj(res.mesh, obj);
        std::ofstream diag(std::filesystem::path(opt.out) / "diagnostics.csv");
        immersion::write_diagnostics_csv(res.mesh, res.abc, res.K, sys.eta, sys.beta, diag);
        std::ofstream fol(std::filesystem::path(opt.out) / "foliation.txt");
        for (const auto& ln : res.foliation.lines) {
            fol << "delta = " << ln.delta;
            if (ln.intersects)
                fol << ": mean H = " << ln.mean << ", max deviation = " << ln.max_deviation
                    << " over " << ln.n_samples << " samples\n";
            else
                fol << ": " << ln.note << "\n";
        }
    }

    const bool gauss_ok = res.gauss_max <= tol.gauss;
    const bool metric_ok = res.mesh.metric_err.max_abs_interior(2) <= tol.mesh_metric_rel;
    const bool defect_ok = res.mesh.path_defect <= tol.path_defect;
    const bool k_ok = res.k_min >= -1.0 - tol.curvature_band && res.k_max <= -1.0 + tol.curvature_band;
    const bool foliation_ok = res.foliation.max_deviation() <= tol.foliation_grid;
    if (res.codazzi_max > tol.codazzi_grid)
        std::cout << "warning: gridded Codazzi residual " << res.codazzi_max
                  << " above tolerance " << tol.codazzi_grid << "\n";

    std::cout << "mesh " << res.mesh.nt << "x" << res.mesh.nx << ", window ["
              << res.window.first << ", " << res.window.second << "]\n"
              << "gauss " << res.gauss_max << ", metric " << res.mesh.metric_err.max_abs_interior(2)
              << ", drift " << res.mesh.max_orthonormality_drift << ", path defect "
              << res.mesh.path_defect << "\n"
              << "interior K in [" << res.k_min << ", " << res.k_max << "], foliation deviation "
              << res.foliation.max_deviation() << "\n";

    write_manifest(opt, "immerse", tol,
                   {{"abc_sign", res.abc_sign},
                    {"mesh_nt", res.mesh.nt},
                    {"mesh_nx", res.mesh.nx},
                    {"gauss_max", res.gauss_max},
                    {"codazzi_max", res.codazzi_max},
                    {"metric_err", res.mesh.metric_err.max_abs_interior(2)},
                    {"drift", res.mesh.max_orthonormality_drift},
                    {"path_defect", res.mesh.path_defect},
                    {"K_min", res.k_min},
                    {"K_max", res.k_max},
                    {"foliation_deviation", res.foliation.max_deviation()}});
    return (gauss_ok && metric_ok && defect_ok && k_ok && foliation_ok) ? kOk : kCheckFailed;
}

inline int cmd_probe(const Options& opt) {
    const Tolerances tol = parse_tolerances(opt);
    const PssSystem sys = load_system(opt.spec);
    const auto samples = make_jet_samples(sys, opt.samples, opt.seed);
    try {
        const auto witness = obstruction::verify_inconsistency(sys, samples, tol);
        std::filesystem::create_directories(opt.out);
        std::ofstream f(std::filesystem::path(opt.out) / "witness.txt");
        f << witness.to_text() << "\n";
        std::cout << witness.to_text() << "\n";
        const bool inconsistent =
            witness.conclusion == obstruction::ObstructionWitness::Conclusion::Inconsistent;
        write_manifest(opt, "probe", tol,
                       {{"group", witness.group.name()},
                        {"determinant", witness.det},
                        {"conclusion", inconsistent ? "inconsistent" : "inconclusive"}});
        return inconsistent ? kOk : kCheckFailed;
    } catch (const std::invalid_argument& e) {
        // group-I systems are the consistent family
        std::cerr << e.what() << "\n";
        return kUsage;
    } catch (const ClassificationError& e) {
        std::cerr << "classification ambiguous: " << e.what() << "\n";
        return kAmbiguous;
    }
}

inline int cmd_report(const Options& opt) {
    const Tolerances tol = parse_tolerances(opt);
    const PssSystem sys = load_system(opt.spec);
    const auto samples = make_jet_samples(sys, opt.samples, opt.seed);

    std::ostringstream os;
    const ConditionReport check = lemma_check(sys, samples, tol);
    os << "== lemma conditions ==\n" << check.summary();
    bool ok = check.passed();

    GroupLabel label;
    bool have_label = false;
    try {
        label = classify(sys, samples, tol);
        have_label = true;
        os << "\n== classification ==\n" << label.describe() << "\n";
    } catch (const ClassificationError& e) {
        os << "\n== classification ==\nambiguous: " << e.what() << "\n";
        ok = false;
    }

    try {
        os << "\n== evolution equation ==\nz0_t = " << evolution_rhs(sys).str() << "\n";
    } catch (const std::domain_error& e) {
        os << "\n== evolution equation ==\nnot in the admissible family: " << e.what() << "\n";
    }

    if (have_label && label.group == GroupLabel::Group::I) {
        const auto bounds = immersion::strip_bounds(opt.l, opt.gamma);
        os << "\n== universal immersion ==\nstrip for l=" << opt.l << ", gamma=" << opt.gamma
           << ": (" << bounds.lower << ", " << bounds.upper << ")\n";
        try {
            const auto sel = immersion::select_abc_sign(sys, opt.l, opt.gamma, 50, opt.seed, tol);
            os << "sign pairing: abc sign " << (sel.abc_sign > 0 ? "+" : "-") << " (residual "
               << sel.selected_max << " vs rejected " << sel.rejected_max << ")\n";
        } catch (const immersion::SignPairingError& e) {
            os << "sign pairing failed: " << e.what() << "\n";
            ok = false;
        }
    } else if (have_label) {
        const auto witness = obstruction::verify_inconsistency(sys, samples, tol);
        os << "\n== obstruction ==\n" << witness.to_text() << "\n";
        ok = ok && witness.conclusion == obstruction::ObstructionWitness::Conclusion::Inconsistent;
    }

    std::cout << os.str();
    std::filesystem::create_directories(opt.out);
    std::ofstream f(std::filesystem::path(opt.out) / "report.txt");
    f << os.str();
    write_manifest(opt, "report", tol, {{"passed", ok}});
    return ok ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv) {
    CLI::App app{"eta pseudo-spherical evolution equations: verification, solving, immersion"};
    app.require_subcommand(1);
    Options opt;

    auto add_common = [&](CLI::App* cmd, bool needs_spec = true) {
        auto* o = cmd->add_option("--spec", opt.spec, "system spec file");
        if (needs_spec) o->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", opt.out, "output directory");
        cmd->add_option("--seed", opt.seed, "random seed");
        cmd->add_option("--samples", opt.samples, "number of sample jet points");
        cmd->add_option("--tol", opt.tol, "tolerance override NAME=VALUE")->take_all();
    };
    auto add_grid = [&](CLI::App* cmd) {
        cmd->add_option("--xmin", opt.xmin);
        cmd->add_option("--xmax", opt.xmax);
        cmd->add_option("--nx", opt.nx);
        cmd->add_flag("--dirichlet", opt.dirichlet, "dirichlet boundaries (default periodic)");
        cmd->add_flag_callback("--periodic", [&] { opt.dirichlet = false; });
        cmd->add_option("--u0", opt.u0, "initial profile, expression in x");
    };
    auto add_stepper = [&](CLI::App* cmd) {
        cmd->add_option("--dt", opt.dt);
        cmd->add_option("--tend", opt.tend);
        cmd->add_option("--store-every", opt.store_every);
        cmd->add_option("--stencil", opt.stencil)->check(CLI::IsMember({2, 4}));
    };
    auto add_immersion = [&](CLI::App* cmd) {
        cmd->add_option("--l", opt.l, "closed-form parameter l");
        cmd->add_option("--gamma", opt.gamma, "closed-form parameter gamma");
        cmd->add_option("--abc-sign", opt.abc_sign, "+, - or auto")
            ->check(CLI::IsMember({"+", "-", "auto"}));
        cmd->add_option("--margin", opt.margin, "relative strip interior margin");
        cmd->add_option("--solution", opt.solution_csv, "use an existing solution CSV");
    };

    int (*fn)(const Options&) = nullptr;
    auto* check = app.add_subcommand("check", "verify the structure-equation conditions");
    add_common(check);
    check->callback([&] { fn = &cmd_check; });
    auto* classify_ = app.add_subcommand("classify", "classify into groups I-V");
    add_common(classify_);
    classify_->callback([&] { fn = &cmd_classify; });
    auto* rhs = app.add_subcommand("rhs", "print the admissible evolution right-hand side");
    add_common(rhs);
    rhs->callback([&] { fn = &cmd_rhs; });
    auto* solve_ = app.add_subcommand("solve", "integrate the evolution equation");
    add_common(solve_);
    add_grid(solve_);
    add_stepper(solve_);
    solve_->callback([&] { fn = &cmd_solve; });
    auto* immerse = app.add_subcommand("immerse", "reconstruct the surface in E^3");
    add_common(immerse);
    add_grid(immerse);
    add_stepper(immerse);
    add_immersion(immerse);
    immerse->callback([&] { fn = &cmd_immerse; });
    auto* probe = app.add_subcommand("probe", "nonexistence witness for groups II-V");
    add_common(probe);
    probe->callback([&] { fn = &cmd_probe; });
    auto* report = app.add_subcommand("report", "combined verification report");
    add_common(report);
    add_immersion(report);
    report->callback([&] { fn = &cmd_report; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }
    try {
        return fn ? fn(opt) : kUsage;
    } catch (const expr::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
}

}  // namespace pss::cli
