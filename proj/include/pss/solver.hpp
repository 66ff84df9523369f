#pragma once

// Method-of-lines integration of z_{0,t} = F(z0,...,zk) on a uniform 1-D
// grid: finite-difference spatial jets (iterated first-derivative stencils
// of order 2 or 4), classical RK4 in time with a fixed step, abort on the
// first non-finite value.

#include <cstdio>
#include <functional>
#include <iostream>

#include "pss/system.hpp"

namespace pss::solver {

using expr::Expression;
using expr::JetPoint;

struct Grid {
    double x_min = 0.0, x_max = 1.0;
    int nx = 8;
    enum class Boundary { Periodic, Dirichlet } boundary = Boundary::Periodic;
    // Dirichlet boundary values as functions of t
    std::function<double(double)> left_value, right_value;

    double h() const {
        return boundary == Boundary::Periodic ? (x_max - x_min) / nx : (x_max - x_min) / (nx - 1);
    }
    double x(int i) const { return x_min + i * h(); }

    void validate(int stencil_order) const {
        if (x_max <= x_min) throw std::invalid_argument("grid: x_max must exceed x_min");
        if (nx < 8) throw std::invalid_argument("grid: nx must be >= 8");
        const int need = boundary == Boundary::Periodic ? stencil_order + 1 : 2 * stencil_order + 1;
        if (nx < need) throw std::invalid_argument("grid too small for the requested stencil");
        if (boundary == Boundary::Dirichlet && (!left_value || !right_value))
            throw std::invalid_argument("dirichlet grid requires boundary value functions");
    }
};

struct StepperConfig {
    double dt = 1e-4;          // > 0
    double t_end = 1.0;
    int jet_stencil_order = 4; // 2 or 4
    int store_every = 1;       // >= 1
};

struct SolutionField {
    Grid grid;
    int k = 0;
    std::vector<double> times;
    std::vector<std::vector<double>> u;                  // [frame][i]
    std::vector<std::vector<std::vector<double>>> jets;  // [frame][order-1][i] = z_order
    std::vector<double> max_structure_residual;          // per frame, when solved from a system
};

struct SolverAbort : std::runtime_error {
    double t_last;
    explicit SolverAbort(double t)
        : std::runtime_error("solver aborted on non-finite value; last valid t = " +
                             std::to_string(t)),
          t_last(t) {}
};

// ---------------------------------------------------------------------------
// finite-difference first derivative of one row

inline std::vector<double> derivative_row(const std::vector<double>& f, const Grid& g, int order) {
    const int n = (int)f.size();
    const double h = g.h();
    std::vector<double> d(n);
    auto wrap = [n](int i) { return ((i % n) + n) % n; };
    if (order == 2) {
        if (g.boundary == Grid::Boundary::Periodic) {
            for (int i = 0; i < n; ++i) d[i] = (f[wrap(i + 1)] - f[wrap(i - 1)]) / (2 * h);
        } else {
            d[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h);
            for (int i = 1; i < n - 1; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2 * h);
            d[n - 1] = (3 * f[n - 1] - 4 * f[n - 2] + f[n - 3]) / (2 * h);
        }
    } else if (order == 4) {
        if (g.boundary == Grid::Boundary::Periodic) {
            for (int i = 0; i < n; ++i)
                d[i] = (-f[wrap(i + 2)] + 8 * f[wrap(i + 1)] - 8 * f[wrap(i - 1)] + f[wrap(i - 2)]) /
                       (12 * h);
        } else {
            d[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h);
            d[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h);
            for (int i = 2; i < n - 2; ++i)
                d[i] = (-f[i + 2] + 8 * f[i + 1] - 8 * f[i - 1] + f[i - 2]) / (12 * h);
            d[n - 2] = (3 * f[n - 1] + 10 * f[n - 2] - 18 * f[n - 3] + 6 * f[n - 4] - f[n - 5]) /
                       (12 * h);
            d[n - 1] = (25 * f[n - 1] - 48 * f[n - 2] + 36 * f[n - 3] - 16 * f[n - 4] +
                        3 * f[n - 5]) /
                       (12 * h);
        }
    } else {
        throw std::invalid_argument("stencil order must be 2 or 4");
    }
    return d;
}

// z_{i+1} by differencing z_i: one code path for arbitrary k
inline std::vector<std::vector<double>> spatial_jets(const std::vector<double>& u, const Grid& g,
                                                     int k, int order) {
    g.validate(order);
    if ((int)u.size() != g.nx) throw std::invalid_argument("spatial_jets: row size != nx");
    std::vector<std::vector<double>> jets;
    jets.reserve(k);
    const std::vector<double>* prev = &u;
    for (int i = 0; i < k; ++i) {
        jets.push_back(derivative_row(*prev, g, order));
        prev = &jets.back();
    }
    return jets;
}

// ---------------------------------------------------------------------------
// stepping

namespace detail {

inline void apply_dirichlet(std::vector<double>& u, const Grid& g, double t) {
    if (g.boundary != Grid::Boundary::Dirichlet) return;
    u.front() = g.left_value(t);
    u.back() = g.right_value(t);
}

// F evaluated pointwise on a row, with jets recomputed from that row
inline std::vector<double> rhs_row(const Expression& F, const std::vector<double>& u,
                                   const Grid& g, double t, int k, int order, JetPoint& scratch) {
    const auto jets = spatial_jets(u, g, k, order);
    std::vector<double> out(g.nx);
    scratch.t = t;
    scratch.z.resize(k + 1);
    for (int i = 0; i < g.nx; ++i) {
        scratch.x = g.x(i);
        scratch.z[0] = u[i];
        for (int j = 0; j < k; ++j) scratch.z[j + 1] = jets[j][i];
        out[i] = F.evaluate(scratch);
    }
    return out;
}

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace detail

// One classical RK4 step of the last stored frame state; returns the new row.
inline std::vector<double> rk4_step(const Expression& F, const std::vector<double>& u,
                                    const Grid& g, double t, double dt, int k, int order,
                                    JetPoint& scratch) {
    auto stage = [&](const std::vector<double>& base, const std::vector<double>& slope,
                     double frac) {
        std::vector<double> s(base.size());
        for (std::size_t i = 0; i < base.size(); ++i) s[i] = base[i] + frac * dt * slope[i];
        detail::apply_dirichlet(s, g, t + frac * dt);
        return s;
    };
    const auto k1 = detail::rhs_row(F, u, g, t, k, order, scratch);
    const auto u2 = stage(u, k1, 0.5);
    const auto k2 = detail::rhs_row(F, u2, g, t + 0.5 * dt, k, order, scratch);
    const auto u3 = stage(u, k2, 0.5);
    const auto k3 = detail::rhs_row(F, u3, g, t + 0.5 * dt, k, order, scratch);
    const auto u4 = stage(u, k3, 1.0);
    const auto k4 = detail::rhs_row(F, u4, g, t + dt, k, order, scratch);
    std::vector<double> next(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        next[i] = u[i] + dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    detail::apply_dirichlet(next, g, t + dt);
    return next;
}

// Advances the last frame of `field` by cfg.dt (aborts on non-finite values).
inline void step(SolutionField& field, const Expression& F, const StepperConfig& cfg,
                 const JetPoint& context) {
    if (field.u.empty()) throw std::invalid_argument("step: field holds no frames");
    JetPoint scratch = context;
    const double t = field.times.back();
    auto next = rk4_step(F, field.u.back(), field.grid, t, cfg.dt, field.k, cfg.jet_stencil_order,
                         scratch);
    if (!detail::all_finite(next)) throw SolverAbort(t);
    field.times.push_back(t + cfg.dt);
    field.jets.push_back(spatial_jets(next, field.grid, field.k, cfg.jet_stencil_order));
    field.u.push_back(std::move(next));
}

// ---------------------------------------------------------------------------
// full integration

inline SolutionField solve(const Expression& F, const std::function<double(double)>& u0,
                           const Grid& grid, const StepperConfig& cfg, const JetPoint& context,
                           int k, const PssSystem* residual_system = nullptr) {
    grid.validate(cfg.jet_stencil_order);
    if (cfg.dt <= 0) throw std::invalid_argument("solve: dt must be > 0");
    if (cfg.store_every < 1) throw std::invalid_argument("solve: store_every must be >= 1");
    if (F.max_jet_order() > k) throw std::invalid_argument("solve: F references jets beyond k");

    std::array<Expression, 3> residuals{};
    if (residual_system) residuals = structure_residual_expressions(*residual_system, F);

    SolutionField field;
    field.grid = grid;
    field.k = k;

    JetPoint scratch = context;

    std::vector<double> u(grid.nx);
    for (int i = 0; i < grid.nx; ++i) u[i] = u0(grid.x(i));
    detail::apply_dirichlet(u, grid, 0.0);

    auto store = [&](const std::vector<double>& row, double t) {
        field.times.push_back(t);
        field.u.push_back(row);
        field.jets.push_back(spatial_jets(row, grid, k, cfg.jet_stencil_order));
        if (residual_system) {
            const auto& jets = field.jets.back();
            scratch.t = t;
            scratch.z.resize(k + 1);
            double worst = 0.0;
            const bool skip_boundary = grid.boundary == Grid::Boundary::Dirichlet;
            for (int i = skip_boundary ? 1 : 0; i < grid.nx - (skip_boundary ? 1 : 0); ++i) {
                scratch.x = grid.x(i);
                scratch.z[0] = row[i];
                for (int j = 0; j < k; ++j) scratch.z[j + 1] = jets[j][i];
                try {
                    for (const Expression& r : residuals)
                        worst = std::max(worst, std::abs(r.evaluate(scratch)));
                } catch (const expr::EvalError&) {
                    // non-generic point (vanishing denominator): excluded from the max
                }
            }
            field.max_structure_residual.push_back(worst);
        }
    };

    store(u, 0.0);
    if (cfg.t_end <= 0.0) return field;

    const int n_steps = (int)std::ceil(cfg.t_end / cfg.dt - 1e-12);
    double t = 0.0;
    for (int s = 1; s <= n_steps; ++s) {
        const double dt = std::min(cfg.dt, cfg.t_end - t);
        auto next = rk4_step(F, u, grid, t, dt, k, cfg.jet_stencil_order, scratch);
        if (!detail::all_finite(next)) throw SolverAbort(t);
        u = std::move(next);
        t += dt;
        if (s % cfg.store_every == 0 || s == n_steps) store(u, t);
    }
    return field;
}

inline SolutionField solve(const PssSystem& sys, const std::function<double(double)>& u0,
                           const Grid& grid, const StepperConfig& cfg) {
    const Expression F = evolution_rhs(sys);
    return solve(F, u0, grid, cfg, sys.base_point(), sys.k, &sys);
}

// ---------------------------------------------------------------------------
// empirical convergence order: least-squares slope of log(error) vs log(h)
// over a family of grids, with dt scaled like h^2 so time error stays
// subdominant

inline double convergence_order(const Expression& F,
                                const std::function<double(double, double)>& exact,
                                const std::vector<Grid>& grids, const StepperConfig& base_cfg,
                                const JetPoint& context, int k) {
    if (grids.size() < 3) throw std::invalid_argument("convergence_order: need >= 3 grids");
    std::vector<double> log_h, log_e;
    const double h0 = grids.front().h();
    for (const Grid& g : grids) {
        StepperConfig cfg = base_cfg;
        const double ratio = g.h() / h0;
        cfg.dt = base_cfg.dt * ratio * ratio;
        cfg.store_every = 1 << 30;  // final frame only
        const auto field = solve(F, [&](double x) { return exact(x, 0.0); }, g, cfg, context, k);
        double err = 0.0;
        const auto& row = field.u.back();
        for (int i = 0; i < g.nx; ++i)
            err = std::max(err, std::abs(row[i] - exact(g.x(i), field.times.back())));
        if (err == 0.0)
            throw std::domain_error("convergence_order: zero error, order undefined");
        log_h.push_back(std::log(g.h()));
        log_e.push_back(std::log(err));
    }
    const int n = (int)log_h.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sx += log_h[i];
        sy += log_e[i];
        sxx += log_h[i] * log_h[i];
        sxy += log_h[i] * log_e[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---------------------------------------------------------------------------
// CSV dump: header `t,x,u,z1,...,zk`, rows sorted by (t, x), 17 significant
// digits (round-trip exact)

inline void write_csv(const SolutionField& field, std::ostream& os) {
    os << "t,x,u";
    for (int i = 1; i <= field.k; ++i) os << ",z" << i;
    os << "\n";
    char buf[40];
    auto put = [&](double v, char sep) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf << sep;
    };
    for (std::size_t f = 0; f < field.times.size(); ++f) {
        for (int i = 0; i < field.grid.nx; ++i) {
            put(field.times[f], ',');
            put(field.grid.x(i), ',');
            std::snprintf(buf, sizeof buf, "%.17g", field.u[f][i]);
            os << buf;
            for (int j = 0; j < field.k; ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", field.jets[f][j][i]);
                os << ',' << buf;
            }
            os << "\n";
        }
    }
}

inline SolutionField read_csv(std::istream& is) {
    std::string header;
    if (!std::getline(is, header)) throw std::runtime_error("solution CSV: empty input");
    int k = 0;
    {
        std::stringstream ss(header);
        std::string col;
        std::vector<std::string> cols;
        while (std::getline(ss, col, ',')) cols.push_back(col);
        if (cols.size() < 3 || cols[0] != "t" || cols[1] != "x" || cols[2] != "u")
            throw std::runtime_error("solution CSV: unexpected header: " + header);
        k = (int)cols.size() - 3;
    }
    SolutionField field;
    field.k = k;
    std::vector<double> row(3 + k);
    std::string line;
    std::vector<double> xs;
    bool first_frame_done = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        for (int c = 0; c < 3 + k; ++c) {
            if (!std::getline(ss, cell, ',')) throw std::runtime_error("solution CSV: short row");
            row[c] = std::stod(cell);
        }
        const double t = row[0], x = row[1];
        if (field.times.empty() || t != field.times.back()) {
            if (!field.times.empty()) first_frame_done = true;
            field.times.push_back(t);
            field.u.emplace_back();
            field.jets.emplace_back(k);
        }
        if (!first_frame_done) xs.push_back(x);
        field.u.back().push_back(row[2]);
        for (int j = 0; j < k; ++j) field.jets.back()[j].push_back(row[3 + j]);
    }
    if (xs.size() < 2) throw std::runtime_error("solution CSV: need at least 2 spatial nodes");
    field.grid.x_min = xs.front();
    field.grid.x_max = xs.back();
    field.grid.nx = (int)xs.size();
    field.grid.boundary = Grid::Boundary::Dirichlet;  // spacing (x_max-x_min)/(nx-1)
    field.grid.left_value = field.grid.right_value = [](double) { return 0.0; };
    for (const auto& frame : field.u)
        if (frame.size() != xs.size()) throw std::runtime_error("solution CSV: ragged frames");
    return field;
}

}  // namespace pss::solver
