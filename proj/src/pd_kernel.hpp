#pragma once

#include <Eigen/Dense>

#include <array>

#include "cheeger/geometry.hpp"

namespace cheeger::detail {

/// min over v in [lo, hi] (cellwise, v == 0 outside the work box) of
///   tv(v) - linear * Σ v h^n,
/// with tv the blended forward/node-averaged isotropic total variation from
/// tv_core. lo == nullptr means a zero lower bound. The work box must keep
/// one cell of margin inside the grid.
struct PdProblem {
    const GridSpec* spec = nullptr;
    const Eigen::ArrayXd* lo = nullptr;
    const Eigen::ArrayXd* hi = nullptr;
    Real linear = 0.0;
    CellBox box;
};

struct PdOptions {
    Real tol_gap_abs = 1e-8; // certified stop on the primal-dual gap
    long max_iters = 50000;
    int check_every = 96;
    // Secondary stop: relative drift of (tv, linear*mass) per 100 iterations
    // below stall_tol for stall_checks consecutive checks. 0 disables it.
    Real stall_tol = 0.0;
    int stall_checks = 3;
    // Dual/primal step ratio: sigma = beta * step, tau = step / beta,
    // keeping tau * sigma * L^2 <= 1.
    Real step_ratio = 1.0;
};

/// Full-grid primal and dual arrays; reusable across calls for warm starts.
/// p is the forward-difference dual (cells), q the node-averaged dual
/// (nodes, stored on the cell lattice).
struct PdState {
    Eigen::ArrayXd u;
    std::array<Eigen::ArrayXd, 3> p;
    std::array<Eigen::ArrayXd, 3> q;
    bool valid = false;

    void reset(const GridSpec& spec);
};

struct PdOutcome {
    Real primal = 0.0; // tv - linear * mass (physical units)
    Real dual = 0.0;   // lower bound from the dual function
    Real gap = 0.0;    // primal - dual at the last check
    Real tv_value = 0.0;
    Real mass = 0.0; // Σ v h^n
    long iterations = 0;
    bool converged = false;
    bool stalled = false; // stopped by the stall criterion, not the gap
    int stalled_checks = 0;
};

/// Chambolle-Pock with over-relaxation theta = 1 and steps
/// tau = sigma = 0.999 h / (2 sqrt(dim)) from the shared norm bound.
PdOutcome run_pd(const PdProblem& prob, PdState& state, const PdOptions& opts);

} // namespace cheeger::detail
