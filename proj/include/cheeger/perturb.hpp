#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cheeger/capacity.hpp"
#include "cheeger/geometry.hpp"
#include "cheeger/oracles.hpp"
#include "cheeger/solver.hpp"

namespace cheeger {

// ---------------------------------------------------------------------------
// Families
// ---------------------------------------------------------------------------

/// One hole center with its shrink schedule eps(delta) = scale * delta^power.
struct HoleSpec {
    Eigen::Array3d center{0, 0, 0};
    Real scale = 1.0;
    Real power = 1.0;

    Real eps(Real delta) const { return scale * std::pow(delta, power); }
};

/// Ω_δ = Ω \ ∪_i B(x_i, eps_i(δ)) with one designated dominant center.
struct HoleFamily {
    Shape base_shape;
    GridSpec grid;
    std::vector<HoleSpec> holes;
    int dominant = 0;
    std::vector<Real> deltas; // strictly decreasing positive

    /// Throws FamilyError when the dominance or monotonicity conditions fail.
    void validate() const;
};

/// Smooth radial bump rho(s) = (1 - s^2)^2 for s < 1, used for the
/// R(x, delta) = amplitude * delta^alpha * rho(|x - center| / (radius*|delta|)) * (x - center)
/// perturbation concentrated near a boundary point.
struct BoundaryBump {
    Eigen::Array3d center{0, 0, 0};
    Real alpha = 3.0;
    Real radius = 1.0;
    Real amplitude = 1.0;
};

/// T_delta(x) = (1 - delta * rate) x + R(x, delta); rate is the scaling rate
/// of the family, distinct from the solver's calibration field.
struct DiffeoFamily {
    Shape base_shape;
    GridSpec grid;
    Real rate = 0.0;
    std::optional<BoundaryBump> bump;
    std::vector<Real> deltas; // positive, strictly decreasing; both signs used

    Eigen::Array3d apply(const Eigen::Array3d& x, Real delta) const;
    /// Inverse by fixed-point iteration on the R term, tolerance 1e-10 * h.
    Eigen::Array3d invert(const Eigen::Array3d& x, Real delta) const;
    /// Smallest |det DT_delta| over a sample lattice on the grid box.
    Real min_jacobian(Real delta) const;

    void validate() const; // invertibility on every delta in the grid
};

/// Pullback occupancy field: occ_delta(x) = occ(T_delta^{-1}(x)), sampled
/// bilinearly; the result is tagged Generic.
GridDomain pullback_domain(const GridDomain& base, const DiffeoFamily& fam, Real delta);

// ---------------------------------------------------------------------------
// Regression
// ---------------------------------------------------------------------------

struct SlopeFit {
    Real coefficient = 0.0;
    Real coefficient_se = 0.0;
    Real exponent = 0.0;
    Real exponent_se = 0.0;
    int n_used = 0;
    Real rms_residual_rel = 0.0; // rms residual / rms y over fitted samples
    bool exponent_within_pred = false;
};

enum class FitModel { LinearThroughOrigin, LogLog };

/// Least squares on samples with |y| above 3x the noise floor. LogLog fits
/// the exponent first and, when it lands within 20% of `predicted_exponent`,
/// refits the coefficient through the origin at the predicted power.
/// Throws InsufficientSignalError when fewer than 4 samples survive.
SlopeFit fit_slope(const std::vector<Real>& x, const std::vector<Real>& y,
                   FitModel model, Real noise_floor,
                   Real predicted_exponent = 1.0);

struct SlopeReport {
    std::string driver;                          // "eps^(n-1)" | "delta" | "cap_delta"
    std::vector<std::pair<Real, Real>> samples;  // (driver, lambda - lambda0), driver desc
    SlopeFit fit;
    Real predicted_coefficient = 0.0;
    std::string theorem_tag;
    Real noise_floor = 0.0;
    bool insufficient_signal = false;
    std::string notes;
};

/// Spread of the base eigenvalue across a randomized dual restart and a
/// tolerance refinement; slope assertions only count samples above 3x this.
Real estimate_noise_floor(const GridDomain& domain, const SolverOptions& opts,
                          Real* lambda_out = nullptr);

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

/// Density classification of a point against the extracted eigenset:
/// mean eigenset occupancy over B(x, 3h), with the domain occupancy deciding
/// exterior-in-Ω; outside the bands the point is Unclassified.
enum class RegimeClass { Interior, Exterior, Boundary, Unclassified };

std::string to_string(RegimeClass c);

RegimeClass classify_center(const GridDomain& eigenset, const GridDomain& domain,
                            const Eigen::Array3d& x);

struct SweepRow {
    Real delta = 0.0;
    Real driver = 0.0; // eps_dominant^{n-1} (holes) or delta (diffeo)
    Real lambda = 0.0;
    Real lambda_minus_base = 0.0;
    Real eigenset_l1_distance = 0.0; // ||χ_{A_delta} - χ_A||_L1
    Real tv_mass = 0.0;              // tv of the unit-mass eigenfunction
    Real eigenset_volume = 0.0;
    Real duality_gap = 0.0;
    long inner_iterations = 0;
    GridDomain domain;   // Ω_delta, kept for capacity post-processing
    GridDomain eigenset; // A_delta
};

struct ExperimentTolerances {
    Real slope_rel = 0.10;      // fitted vs predicted coefficient
    Real bracket_slack = 0.10;  // relative slack on the per-sample bounds
    Real derivative_rel = 0.05; // difference quotient vs rate * lambda0
};

struct HoleExperimentReport {
    Real lambda0 = 0.0;
    Real eigenset_volume0 = 0.0;
    Real base_tv_mass = 0.0; // tv of the unit-mass base eigenfunction
    Real noise_floor = 0.0;
    RegimeClass regime = RegimeClass::Unclassified;
    bool hint_mismatch = false;
    SlopeReport slope;
    std::vector<SweepRow> rows;
    bool bracket_ok = true;  // per-sample TH2Eqt1 / TH2Eqt2 bounds
    bool slope_ok = true;    // regime-dependent fitted-vs-predicted check
    std::string detail;
    GridDomain base_domain;
    GridDomain base_eigenset;
};

HoleExperimentReport run_hole_experiment(
    const HoleFamily& fam, std::optional<oracles::HoleRegime> regime_hint = {},
    const SolverOptions& solver = {}, const ExperimentTolerances& tol = {});

struct DiffeoExperimentReport {
    Real lambda0 = 0.0;
    Real noise_floor = 0.0;
    Real derivative_estimate = 0.0; // symmetric difference quotient, smallest usable delta
    Real predicted_derivative = 0.0; // rate * lambda0
    std::vector<Real> deltas;
    std::vector<Real> quotients;     // (lambda_{+d} - lambda_{-d}) / (2d)
    std::vector<SweepRow> rows;      // both signs, delta descending by |delta|
    SlopeReport slope;               // lambda_delta - lambda0 vs delta
    bool derivative_ok = true;
    bool continuity_ok = true;       // |lambda_delta - lambda0| decays monotonically
    std::string detail;
    GridDomain base_domain;
    GridDomain base_eigenset;
};

DiffeoExperimentReport run_diffeo_experiment(const DiffeoFamily& fam,
                                             const SolverOptions& solver = {},
                                             const ExperimentTolerances& tol = {});

/// Theorem-1 style verification over an already-solved family: capacity of
/// the closed symmetric difference per delta, the implied coefficient
/// (lambda_delta - lambda0) |A_delta| / cap, eigenset L1 convergence and
/// tv-mass convergence.
struct CapacitySequenceRow {
    Real delta = 0.0;
    Real cap_hull = 0.0;        // cap1 of adh(Ω Δ Ω_delta)
    Real cap_closed_form = 0.0; // ball formula when available, else NaN
    Real coefficient = 0.0;     // signed eps_delta
    Real eigenset_l1_distance = 0.0;
    Real tv_mass_diff = 0.0; // |tv(u_delta) - tv(u0)|
    Real eigenset_volume = 0.0;
};

struct CapacitySequenceReport {
    std::vector<CapacitySequenceRow> rows; // delta descending
    Real min_eigenset_volume = 0.0;
    bool coefficients_ok = true; // in [-tol, 1 + tol]
    bool l1_ok = true;           // decreasing (with slack) to below 0.02 |A|
    bool tv_mass_ok = true;      // decreasing (with slack) to below 0.02 lambda0
    bool capacity_decreasing = true;
    std::string detail;
};

CapacitySequenceReport verify_capacity_sequence(
    const GridDomain& base, Real lambda0, const GridDomain& base_eigenset,
    Real base_tv_mass, const std::vector<SweepRow>& rows,
    const std::vector<Real>& closed_form_caps = {},
    const CapacityOptions& cap_opts = {}, Real coefficient_tol = 0.10);

/// Builds the family, sweeps it, and verifies the capacity-controlled bound;
/// throws FamilyError when the capacity sequence fails to decrease.
CapacitySequenceReport run_capacity_sequence(const HoleFamily& fam,
                                             const SolverOptions& solver = {},
                                             const CapacityOptions& cap_opts = {});

} // namespace cheeger
