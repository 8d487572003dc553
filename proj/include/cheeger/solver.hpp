#pragma once

#include <vector>

#include "cheeger/geometry.hpp"
#include "cheeger/tv.hpp"

namespace cheeger {

struct SolverOptions {
    Real tol_outer = 1e-5;  // relative: stop when inner value >= -tol_outer * lambda
    Real tol_inner = 1e-7;  // primal-dual gap per unit volume (certified stop)
    // Secondary inner stop: the certified gap has an O(1/k) tail, while the
    // primal pair (tv, mass) settles orders of magnitude earlier. The inner
    // solve also stops when their relative drift per 100 iterations stays
    // below stall_tol for three consecutive checks. 0 turns this off.
    Real stall_tol = 3e-7;
    long max_inner = 50000;
    int max_outer = 100;
    int threshold_count = 64;    // quantile scan size in extract_eigenset
    Real certificate_tol = 0.05; // relative thresholds for residual checks
    Real bounds_tol = 0.03;      // relative slack on the two-sided bracket
    unsigned seed = 0;           // != 0 randomizes the initial dual variable
    bool warm_start = true;      // reuse caller-provided state when present
};

struct Residuals {
    Real duality_gap = 0.0;   // final inner gap per unit volume
    Real div_residual = 0.0;  // mass-weighted mean |(-div dual) - lambda| on {u > 0}
    Real alignment = 0.0;     // 1 - <dual, grad u> / tv(u)
    Real ratio_mismatch = 0.0; // |per(A)/vol(A) - lambda|
};

struct EigenResult {
    Real lambda = 0.0;
    ScalarField u;        // eigenfunction, unit mass
    GridDomain eigenset;  // best superlevel set of u
    VectorField dual;     // combined calibration certificate, |dual| <= 1
    VectorField dual_fwd;  // raw forward-difference dual part
    VectorField dual_node; // raw node-averaged dual part (node lattice)
    Residuals residuals;
    std::vector<Real> lambda_history; // Dinkelbach sequence, nonincreasing
    long outer_iterations = 0;
    long inner_iterations = 0; // total primal-dual iterations
    Real lower_bound = 0.0;    // dim (b_dim / |Ω|)^{1/dim}
    Real upper_bound = 0.0;    // perimeter / volume
    Real eigenset_volume = 0.0;
    Real eigenset_ratio = 0.0; // per(A)/vol(A) actually achieved
};

struct InnerResult {
    ScalarField u;
    VectorField dual;      // combined certificate field
    VectorField dual_fwd;  // raw parts, see EigenResult
    VectorField dual_node;
    Real value = 0.0; // tv(u) - lambda * mass(u)
    Real tv_value = 0.0;
    Real mass = 0.0;
    Real gap = 0.0; // primal-dual gap per unit volume
    long iterations = 0;
};

/// Reusable warm-start state across Dinkelbach steps and delta sweeps.
struct SolverState {
    Eigen::ArrayXd u;
    std::array<Eigen::ArrayXd, 3> p; // forward-difference dual
    std::array<Eigen::ArrayXd, 3> q; // node-averaged dual
    bool valid = false;
};

/// Saddle-point solve of min_{0 <= u <= occ} tv(u) - lambda * mass(u) by the
/// Chambolle-Pock scheme with over-relaxation theta = 1 and steps from the
/// tv_core operator norm bound. Throws ConvergenceError past max_inner.
InnerResult inner_pd(const GridDomain& domain, Real lambda,
                     SolverState* warm, const SolverOptions& opts);

/// Dinkelbach iteration on the ratio tv(u)/mass(u), starting from
/// perimeter/volume. Returns the eigenvalue, a unit-mass eigenfunction, the
/// extracted eigenset and the dual certificate.
EigenResult solve(const GridDomain& domain, const SolverOptions& opts = {},
                  SolverState* state = nullptr);

/// Superlevel-set scan: thresholds over quantiles of the positive values,
/// fractional coverage inferred from the eigenfunction's own transition
/// profile, smallest perimeter/volume ratio wins (largest volume on ties).
GridDomain extract_eigenset(const ScalarField& u, int threshold_count = 64,
                            Real* ratio_out = nullptr);

struct CertificateReport {
    Real div_residual = 0.0;
    Real alignment = 0.0;
    Real max_dual_norm = 0.0;
    Real threshold = 0.05;
    bool div_ok = false;
    bool alignment_ok = false;
    bool dual_norm_ok = false;

    bool all_ok() const { return div_ok && alignment_ok && dual_norm_ok; }
};

/// Evaluates the optimality system on a solved result: -div Λ = λ on the
/// support of u (mass-weighted) and Λ·∇u = |∇u| (alignment). Reporting only.
CertificateReport check_certificate(const EigenResult& res,
                                    Real threshold = 0.05);

/// True when all EigenResult invariants hold (mass, nonnegativity, bracket,
/// ratio mismatch, dual norm, Dinkelbach monotonicity).
bool validate_result(const EigenResult& res, const GridDomain& domain,
                     const SolverOptions& opts, std::string* why = nullptr);

} // namespace cheeger
