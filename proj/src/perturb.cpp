#include "cheeger/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

namespace cheeger {

namespace {

Real bump_rho(Real s) {
    if (s >= 1.0) return 0.0;
    const Real t = 1.0 - s * s;
    return t * t;
}

Real bump_rho_prime(Real s) {
    if (s >= 1.0) return 0.0;
    return -4.0 * s * (1.0 - s * s);
}

/// Sequence decreases to below `threshold`: every step either already sits
/// below the threshold or shrinks (10% slack), and the last value is below.
bool decreasing_below(const std::vector<Real>& v, Real threshold) {
    if (v.empty()) return true;
    for (std::size_t i = 1; i < v.size(); ++i) {
        const bool below = v[i] <= threshold && v[i - 1] <= threshold;
        if (!below && v[i] > v[i - 1] * 1.10 + 1e-12) return false;
    }
    return v.back() <= threshold;
}

Real bilinear_sample(const GridDomain& d, const Eigen::Array3d& x) {
    const GridSpec& spec = d.spec;
    // continuous cell-center coordinates
    Eigen::Array3d q = (x - spec.origin) / spec.spacing - 0.5;
    int base[3] = {0, 0, 0};
    Real w[3] = {0.0, 0.0, 0.0};
    for (int a = 0; a < spec.dim; ++a) {
        const Real f = std::floor(q[a]);
        base[a] = static_cast<int>(f);
        w[a] = q[a] - f;
        if (base[a] < -1 || base[a] > spec.cells[a] - 1) return 0.0;
    }
    auto at = [&](int i, int j, int k) -> Real {
        if (i < 0 || j < 0 || k < 0 || i >= spec.cells[0] || j >= spec.cells[1] ||
            k >= spec.cells[2])
            return 0.0;
        return d.occupancy[spec.index(i, j, k)];
    };
    if (spec.dim == 2) {
        const Real v00 = at(base[0], base[1], 0), v10 = at(base[0] + 1, base[1], 0);
        const Real v01 = at(base[0], base[1] + 1, 0), v11 = at(base[0] + 1, base[1] + 1, 0);
        return (1 - w[0]) * (1 - w[1]) * v00 + w[0] * (1 - w[1]) * v10 +
               (1 - w[0]) * w[1] * v01 + w[0] * w[1] * v11;
    }
    Real acc = 0.0;
    for (int dk = 0; dk <= 1; ++dk)
        for (int dj = 0; dj <= 1; ++dj)
            for (int di = 0; di <= 1; ++di) {
                const Real wt = (di ? w[0] : 1 - w[0]) * (dj ? w[1] : 1 - w[1]) *
                                (dk ? w[2] : 1 - w[2]);
                acc += wt * at(base[0] + di, base[1] + dj, base[2] + dk);
            }
    return acc;
}

Real l1_distance(const GridDomain& a, const GridDomain& b) {
    return (a.occupancy - b.occupancy).abs().sum() * a.spec.cell_volume();
}

std::string fmt(Real v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

} // namespace

// ---------------------------------------------------------------------------
// Families
// ---------------------------------------------------------------------------

void HoleFamily::validate() const {
    if (holes.empty()) throw FamilyError("hole family: no holes");
    if (dominant < 0 || dominant >= static_cast<int>(holes.size()))
        throw FamilyError("hole family: dominant index out of range");
    if (deltas.size() < 1) throw FamilyError("hole family: empty delta grid");
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        if (!(deltas[i] > 0)) throw FamilyError("hole family: deltas must be positive");
        if (i > 0 && !(deltas[i] < deltas[i - 1]))
            throw FamilyError("hole family: deltas must decrease strictly");
    }
    for (const HoleSpec& h : holes)
        if (!(h.scale > 0) || !(h.power > 0))
            throw FamilyError("hole family: scales and powers must be positive");
    // Dominance: eps_i / eps_dominant must shrink along the schedule.
    for (std::size_t i = 0; i < holes.size(); ++i) {
        if (static_cast<int>(i) == dominant) continue;
        Real prev = std::numeric_limits<Real>::infinity();
        for (const Real d : deltas) {
            const Real ratio = holes[i].eps(d) / holes[dominant].eps(d);
            if (!(ratio < prev * (1.0 + 1e-12)))
                throw FamilyError("hole family: center " + std::to_string(i) +
                                  " does not stay subordinate to the dominant one");
            if (ratio >= 1.0 - 1e-12 && deltas.size() > 1 && d == deltas.back())
                throw FamilyError("hole family: center " + std::to_string(i) +
                                  " never becomes negligible");
            prev = ratio;
        }
    }
}

Eigen::Array3d DiffeoFamily::apply(const Eigen::Array3d& x, Real delta) const {
    Eigen::Array3d y = (1.0 - delta * rate) * x;
    if (bump) {
        const Eigen::Array3d r = x - bump->center;
        Real norm = 0.0;
        for (int a = 0; a < grid.dim; ++a) norm += r[a] * r[a];
        norm = std::sqrt(norm);
        const Real supp = bump->radius * std::abs(delta);
        if (supp > 0 && norm < supp) {
            const Real amp = bump->amplitude *
                             std::pow(std::abs(delta), bump->alpha) *
                             bump_rho(norm / supp);
            y += amp * r;
        }
    }
    return y;
}

Eigen::Array3d DiffeoFamily::invert(const Eigen::Array3d& x, Real delta) const {
    const Real scale = 1.0 - delta * rate;
    if (std::abs(scale) < 1e-12)
        throw InversionError("diffeo family: map collapses, 1 - delta*rate = 0");
    Eigen::Array3d y = x / scale;
    if (!bump) return y;
    const Real tol = 1e-10 * grid.spacing;
    for (int it = 0; it < 200; ++it) {
        const Eigen::Array3d r = apply(y, delta) - (1.0 - delta * rate) * y; // R(y, delta)
        Eigen::Array3d next = (x - r) / scale;
        if (grid.dim == 2) next[2] = y[2];
        const Real move = (next - y).abs().maxCoeff();
        y = next;
        if (move <= tol) return y;
    }
    throw InversionError("diffeo family: fixed-point inversion did not converge");
}

Real DiffeoFamily::min_jacobian(Real delta) const {
    const int samples = 33;
    const Eigen::Array3d lo = grid.box_lo();
    const Eigen::Array3d hi = grid.box_hi();
    Real best = std::numeric_limits<Real>::infinity();
    const int nk = grid.dim == 3 ? samples : 1;
    for (int k = 0; k < nk; ++k)
        for (int j = 0; j < samples; ++j)
            for (int i = 0; i < samples; ++i) {
                Eigen::Array3d x = lo;
                x[0] += (hi[0] - lo[0]) * i / (samples - 1.0);
                x[1] += (hi[1] - lo[1]) * j / (samples - 1.0);
                if (grid.dim == 3) x[2] += (hi[2] - lo[2]) * k / (samples - 1.0);

                Eigen::Matrix3d J = Eigen::Matrix3d::Identity() * (1.0 - delta * rate);
                J(2, 2) = 1.0;
                if (bump) {
                    const Eigen::Array3d r = x - bump->center;
                    Real norm = 0.0;
                    for (int a = 0; a < grid.dim; ++a) norm += r[a] * r[a];
                    norm = std::sqrt(norm);
                    const Real supp = bump->radius * std::abs(delta);
                    if (supp > 0 && norm < supp && norm > 1e-14) {
                        const Real s = norm / supp;
                        const Real amp = bump->amplitude * std::pow(std::abs(delta), bump->alpha);
                        // D[amp rho(s) r] = amp (rho I + rho'(s)/(supp*norm) r r^T)
                        for (int a = 0; a < grid.dim; ++a)
                            for (int c = 0; c < grid.dim; ++c)
                                J(a, c) += amp * (bump_rho(s) * (a == c ? 1.0 : 0.0) +
                                                  bump_rho_prime(s) / (supp * norm) * r[a] * r[c]);
                    } else if (supp > 0 && norm <= 1e-14) {
                        for (int a = 0; a < grid.dim; ++a) J(a, a) += bump->amplitude *
                            std::pow(std::abs(delta), bump->alpha) * bump_rho(0.0);
                    }
                }
                best = std::min(best, std::abs(J.determinant()));
            }
    return best;
}

void DiffeoFamily::validate() const {
    if (deltas.empty()) throw FamilyError("diffeo family: empty delta grid");
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        if (!(deltas[i] > 0)) throw FamilyError("diffeo family: deltas must be positive");
        if (i > 0 && !(deltas[i] < deltas[i - 1]))
            throw FamilyError("diffeo family: deltas must decrease strictly");
    }
    if (bump && bump->alpha <= 2.0)
        throw FamilyError("diffeo family: bump exponent must exceed 2 so the "
                          "perturbation term stays o(delta)");
    for (const Real d : deltas)
        for (const Real sgn : {1.0, -1.0})
            if (min_jacobian(sgn * d) < 0.05)
                throw FamilyError("diffeo family: map degenerates at delta = " + fmt(sgn * d));
}

GridDomain pullback_domain(const GridDomain& base, const DiffeoFamily& fam, Real delta) {
    GridDomain out;
    out.spec = base.spec;
    out.occupancy = Eigen::ArrayXd::Zero(base.spec.cell_count());
    out.analytic = Analytic::generic();
    const GridSpec& spec = base.spec;
    const int nx = spec.cells[0], ny = spec.cells[1], nz = spec.cells[2];
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const bool frame = i == 0 || j == 0 || i + 1 == nx || j + 1 == ny ||
                                   (spec.dim == 3 && (k == 0 || k + 1 == nz));
                if (frame) continue;
                const Eigen::Array3d x = spec.cell_center(i, j, k);
                const Eigen::Array3d y = fam.invert(x, delta);
                out.occupancy[spec.index(i, j, k)] = bilinear_sample(base, y);
            }
    // Guard: the pulled-back domain must stay clear of the frame.
    const CellBox box = support_box(spec, out.occupancy, 1e-9);
    for (int a = 0; a < spec.dim; ++a)
        if (box.lo[a] <= 1 || box.hi[a] >= spec.cells[a] - 1)
            throw BoundsError("pullback_domain: perturbed domain reaches the grid frame");
    return out;
}

// ---------------------------------------------------------------------------
// Regression
// ---------------------------------------------------------------------------

SlopeFit fit_slope(const std::vector<Real>& x, const std::vector<Real>& y,
                   FitModel model, Real noise_floor, Real predicted_exponent) {
    if (x.size() != y.size()) throw ConfigError("fit_slope: size mismatch");
    std::vector<Real> xs, ys;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (std::abs(y[i]) > 3.0 * noise_floor) {
            xs.push_back(x[i]);
            ys.push_back(y[i]);
        }
    if (xs.size() < 4)
        throw InsufficientSignalError("fit_slope: fewer than 4 samples above the noise floor");

    SlopeFit fit;
    fit.n_used = static_cast<int>(xs.size());

    // Exponent from log-log (positive drivers only).
    {
        std::vector<Real> lx, ly;
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (xs[i] > 0 && std::abs(ys[i]) > 0) {
                lx.push_back(std::log(std::abs(xs[i])));
                ly.push_back(std::log(std::abs(ys[i])));
            }
        if (lx.size() >= 2) {
            const Real mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
            const Real my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
            Real sxx = 0.0, sxy = 0.0, see = 0.0;
            for (std::size_t i = 0; i < lx.size(); ++i) {
                sxx += (lx[i] - mx) * (lx[i] - mx);
                sxy += (lx[i] - mx) * (ly[i] - my);
            }
            fit.exponent = sxx > 0 ? sxy / sxx : 0.0;
            for (std::size_t i = 0; i < lx.size(); ++i) {
                const Real r = ly[i] - my - fit.exponent * (lx[i] - mx);
                see += r * r;
            }
            if (lx.size() > 2 && sxx > 0)
                fit.exponent_se = std::sqrt(see / (lx.size() - 2) / sxx);
            fit.exponent_within_pred =
                std::abs(fit.exponent - predicted_exponent) <=
                0.2 * std::abs(predicted_exponent);
        }
    }

    // Coefficient: least squares through the origin at the predicted power
    // (the free power when the log-log exponent disagrees).
    const Real power = (model == FitModel::LinearThroughOrigin || fit.exponent_within_pred)
                           ? predicted_exponent
                           : fit.exponent;
    Real sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const Real xb = std::copysign(std::pow(std::abs(xs[i]), power), xs[i]);
        sxx += xb * xb;
        sxy += xb * ys[i];
    }
    fit.coefficient = sxx > 0 ? sxy / sxx : 0.0;

    Real sr = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const Real xb = std::copysign(std::pow(std::abs(xs[i]), power), xs[i]);
        const Real r = ys[i] - fit.coefficient * xb;
        sr += r * r;
        sy += ys[i] * ys[i];
    }
    fit.rms_residual_rel = sy > 0 ? std::sqrt(sr / sy) : 0.0;
    if (xs.size() > 1 && sxx > 0)
        fit.coefficient_se = std::sqrt(sr / (xs.size() - 1) / sxx);
    return fit;
}

Real estimate_noise_floor(const GridDomain& domain, const SolverOptions& opts,
                          Real* lambda_out) {
    const EigenResult base = solve(domain, opts);
    if (lambda_out) *lambda_out = base.lambda;

    SolverOptions restart = opts;
    restart.seed = opts.seed ? opts.seed * 2654435761u + 1 : 0x9e3779b9u;
    const EigenResult r1 = solve(domain, restart);

    SolverOptions refined = opts;
    refined.tol_outer = opts.tol_outer / 10.0;
    refined.tol_inner = opts.tol_inner / 10.0;
    refined.max_inner = opts.max_inner * 2;
    const EigenResult r2 = solve(domain, refined);

    return std::max({std::abs(r1.lambda - base.lambda),
                     std::abs(r2.lambda - base.lambda), 1e-12 * base.lambda});
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

std::string to_string(RegimeClass c) {
    switch (c) {
        case RegimeClass::Interior: return "interior";
        case RegimeClass::Exterior: return "exterior";
        case RegimeClass::Boundary: return "boundary";
        case RegimeClass::Unclassified: return "unclassified";
    }
    return "?";
}

namespace {

Real density_in_ball(const GridDomain& field, const Eigen::Array3d& x, Real radius) {
    const GridSpec& spec = field.spec;
    const Ball probe{x, radius};
    Real wsum = 0.0, val = 0.0;
    const Eigen::Array3d lo = x - radius, hi = x + radius;
    int i0, i1, j0, j1, k0 = 0, k1 = 1;
    const auto clampc = [&](int a, Real v) {
        return std::clamp(static_cast<int>(std::floor((v - spec.origin[a]) / spec.spacing)),
                          0, spec.cells[a] - 1);
    };
    i0 = clampc(0, lo[0]);
    i1 = clampc(0, hi[0]) + 1;
    j0 = clampc(1, lo[1]);
    j1 = clampc(1, hi[1]) + 1;
    if (spec.dim == 3) {
        k0 = clampc(2, lo[2]);
        k1 = clampc(2, hi[2]) + 1;
    }
    for (int k = k0; k < k1; ++k)
        for (int j = j0; j < j1; ++j)
            for (int i = i0; i < i1; ++i) {
                const Real w = ball_cell_coverage(probe, spec, i, j, k);
                if (w <= 0) continue;
                wsum += w;
                val += w * field.occupancy[spec.index(i, j, k)];
            }
    return wsum > 0 ? val / wsum : 0.0;
}

} // namespace

RegimeClass classify_center(const GridDomain& eigenset, const GridDomain& domain,
                            const Eigen::Array3d& x) {
    const Real radius = 3.0 * domain.spec.spacing;
    const Real density_a = density_in_ball(eigenset, x, radius);
    const Real density_omega = density_in_ball(domain, x, radius);
    if (density_a > 0.95) return RegimeClass::Interior;
    if (density_a < 0.05 && density_omega > 0.95) return RegimeClass::Exterior;
    if (density_a >= 0.25 && density_a <= 0.75) return RegimeClass::Boundary;
    return RegimeClass::Unclassified;
}

// ---------------------------------------------------------------------------
// Hole experiment
// ---------------------------------------------------------------------------

namespace {

oracles::HoleRegime to_oracle_regime(RegimeClass c) {
    switch (c) {
        case RegimeClass::Interior: return oracles::HoleRegime::Interior;
        case RegimeClass::Exterior: return oracles::HoleRegime::Exterior;
        case RegimeClass::Boundary: return oracles::HoleRegime::Boundary;
        default: throw FamilyError("hole experiment: dominant center unclassifiable");
    }
}

RegimeClass from_oracle_regime(oracles::HoleRegime r) {
    switch (r) {
        case oracles::HoleRegime::Interior: return RegimeClass::Interior;
        case oracles::HoleRegime::Exterior: return RegimeClass::Exterior;
        case oracles::HoleRegime::Boundary: return RegimeClass::Boundary;
    }
    return RegimeClass::Unclassified;
}

SweepRow solve_hole_delta(const HoleFamily& fam, const GridDomain& base,
                          const EigenResult& base_res, Real delta,
                          const SolverOptions& solver, SolverState* chain) {
    BallUnion holes;
    for (const HoleSpec& h : fam.holes)
        holes.balls.push_back(Ball{h.center, h.eps(delta)});
    const GridDomain K = rasterize(Shape{holes}, fam.grid);
    GridDomain omega = subtract(base, K);

    const EigenResult res = solve(omega, solver, chain);

    SweepRow row;
    row.delta = delta;
    const Real eps = fam.holes[fam.dominant].eps(delta);
    row.driver = std::pow(eps, fam.grid.dim - 1);
    row.lambda = res.lambda;
    row.lambda_minus_base = res.lambda - base_res.lambda;
    row.eigenset_l1_distance = l1_distance(res.eigenset, base_res.eigenset);
    row.tv_mass = total_variation(res.u);
    row.eigenset_volume = res.eigenset_volume;
    row.duality_gap = res.residuals.duality_gap;
    row.inner_iterations = res.inner_iterations;
    row.domain = std::move(omega);
    row.eigenset = res.eigenset;
    return row;
}

} // namespace

HoleExperimentReport run_hole_experiment(const HoleFamily& fam,
                                         std::optional<oracles::HoleRegime> regime_hint,
                                         const SolverOptions& solver,
                                         const ExperimentTolerances& tol) {
    fam.validate();
    const GridDomain base = rasterize(fam.base_shape, fam.grid);

    // Unresolvable families are rejected up front.
    const Real h = fam.grid.spacing;
    bool resolvable = false;
    for (const Real d : fam.deltas)
        if (fam.holes[fam.dominant].eps(d) >= h / 4.0) resolvable = true;
    if (!resolvable)
        throw ResolutionError("hole experiment: every hole is below h/4");

    HoleExperimentReport rep;
    const EigenResult base_res = solve(base, solver);
    rep.lambda0 = base_res.lambda;
    rep.eigenset_volume0 = base_res.eigenset_volume;
    rep.base_tv_mass = total_variation(base_res.u);
    rep.base_domain = base;
    rep.base_eigenset = base_res.eigenset;

    rep.regime = classify_center(base_res.eigenset, base,
                                 fam.holes[fam.dominant].center);
    if (regime_hint && from_oracle_regime(*regime_hint) != rep.regime) {
        rep.hint_mismatch = true;
        rep.detail += "classification warning: hint=" +
                      oracles::to_string(*regime_hint) +
                      " computed=" + to_string(rep.regime) + "; ";
    }

    // Noise floor from a dual restart and a tolerance refinement.
    {
        SolverOptions restart = solver;
        restart.seed = solver.seed ? solver.seed * 2654435761u + 1 : 0x9e3779b9u;
        const EigenResult r1 = solve(base, restart);
        SolverOptions refined = solver;
        refined.tol_outer /= 10.0;
        refined.tol_inner /= 10.0;
        refined.max_inner *= 2;
        const EigenResult r2 = solve(base, refined);
        rep.noise_floor = std::max({std::abs(r1.lambda - base_res.lambda),
                                    std::abs(r2.lambda - base_res.lambda),
                                    1e-12 * base_res.lambda});
    }

    // Sweep, warm-starting each solve from the previous one.
    SolverState chain;
    for (const Real d : fam.deltas)
        rep.rows.push_back(solve_hole_delta(fam, base, base_res, d, solver,
                                            solver.warm_start ? &chain : nullptr));

    // Regression against eps^{n-1}.
    std::vector<Real> xs, ys;
    for (const SweepRow& r : rep.rows) {
        xs.push_back(r.driver);
        ys.push_back(r.lambda_minus_base);
    }
    rep.slope.driver = "eps^(n-1)";
    rep.slope.noise_floor = rep.noise_floor;
    for (std::size_t i = 0; i < xs.size(); ++i) rep.slope.samples.push_back({xs[i], ys[i]});
    rep.slope.theorem_tag = "hole:" + to_string(rep.regime);

    const RegimeClass regime =
        rep.regime == RegimeClass::Unclassified && regime_hint
            ? from_oracle_regime(*regime_hint)
            : rep.regime;
    const Real predicted =
        regime == RegimeClass::Unclassified
            ? std::numeric_limits<Real>::quiet_NaN()
            : oracles::hole_slope(to_oracle_regime(regime), fam.grid.dim,
                                  base_res.eigenset_volume);
    rep.slope.predicted_coefficient = predicted;

    try {
        rep.slope.fit = fit_slope(xs, ys, FitModel::LogLog, rep.noise_floor, 1.0);
    } catch (const InsufficientSignalError&) {
        rep.slope.insufficient_signal = true;
        rep.slope.notes = "slope indistinguishable from 0";
    }

    // Per-sample bracket: monotonicity from below, the upper bound with the
    // interior coefficient everywhere, and the boundary coefficient where it
    // applies.
    const Real ub_coef = oracles::hole_slope(oracles::HoleRegime::Interior,
                                             fam.grid.dim, base_res.eigenset_volume);
    const Real noise_pad = 3.0 * rep.noise_floor;
    for (const SweepRow& r : rep.rows) {
        if (r.lambda < rep.lambda0 - noise_pad - 1e-12) {
            rep.bracket_ok = false;
            rep.detail += "lower bracket violated at delta=" + fmt(r.delta) + "; ";
        }
        if (r.lambda > rep.lambda0 + ub_coef * r.driver * (1.0 + tol.bracket_slack) + noise_pad) {
            rep.bracket_ok = false;
            rep.detail += "upper bracket violated at delta=" + fmt(r.delta) + "; ";
        }
        if (regime == RegimeClass::Boundary) {
            const Real bc = oracles::hole_slope(oracles::HoleRegime::Boundary,
                                                fam.grid.dim, base_res.eigenset_volume);
            if (r.lambda > rep.lambda0 + bc * r.driver * (1.0 + tol.bracket_slack) + noise_pad) {
                rep.bracket_ok = false;
                rep.detail += "boundary bound violated at delta=" + fmt(r.delta) + "; ";
            }
        }
    }

    // Fitted-versus-predicted, by regime.
    Real sum_x2 = 0.0;
    for (const Real x : xs) sum_x2 += x * x;
    const Real slope_noise = sum_x2 > 0 ? rep.noise_floor / std::sqrt(sum_x2) : 0.0;
    switch (regime) {
        case RegimeClass::Interior:
            rep.slope_ok = !rep.slope.insufficient_signal &&
                           std::abs(rep.slope.fit.coefficient - predicted) <=
                               tol.slope_rel * predicted;
            break;
        case RegimeClass::Exterior:
            rep.slope_ok = rep.slope.insufficient_signal ||
                           std::abs(rep.slope.fit.coefficient) <= 3.0 * slope_noise;
            break;
        case RegimeClass::Boundary:
            rep.slope_ok = rep.slope.insufficient_signal ||
                           rep.slope.fit.coefficient <=
                               predicted * (1.0 + tol.slope_rel) + 3.0 * slope_noise;
            break;
        default:
            rep.slope_ok = false;
            rep.detail += "no prediction for unclassified center; ";
    }
    if (!rep.slope.insufficient_signal) {
        std::ostringstream os;
        os << "fitted=" << rep.slope.fit.coefficient << " predicted=" << predicted
           << " exponent=" << rep.slope.fit.exponent << "; ";
        rep.detail += os.str();
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Diffeomorphism experiment
// ---------------------------------------------------------------------------

DiffeoExperimentReport run_diffeo_experiment(const DiffeoFamily& fam,
                                             const SolverOptions& solver,
                                             const ExperimentTolerances& tol) {
    fam.validate();
    const GridDomain base = rasterize(fam.base_shape, fam.grid);

    DiffeoExperimentReport rep;
    const EigenResult base_res = solve(base, solver);
    rep.lambda0 = base_res.lambda;
    rep.predicted_derivative = fam.rate * base_res.lambda;
    rep.base_domain = base;
    rep.base_eigenset = base_res.eigenset;

    {
        SolverOptions restart = solver;
        restart.seed = solver.seed ? solver.seed * 2654435761u + 1 : 0x9e3779b9u;
        const EigenResult r1 = solve(base, restart);
        SolverOptions refined = solver;
        refined.tol_outer /= 10.0;
        refined.tol_inner /= 10.0;
        refined.max_inner *= 2;
        const EigenResult r2 = solve(base, refined);
        rep.noise_floor = std::max({std::abs(r1.lambda - base_res.lambda),
                                    std::abs(r2.lambda - base_res.lambda),
                                    1e-12 * base_res.lambda});
    }

    SolverState chain_plus, chain_minus;
    std::vector<Real> lam_plus, lam_minus;
    for (const Real d : fam.deltas) {
        for (const Real sgn : {+1.0, -1.0}) {
            const Real delta = sgn * d;
            GridDomain omega = pullback_domain(base, fam, delta);
            const EigenResult res =
                solve(omega, solver, solver.warm_start
                                          ? (sgn > 0 ? &chain_plus : &chain_minus)
                                          : nullptr);
            SweepRow row;
            row.delta = delta;
            row.driver = delta;
            row.lambda = res.lambda;
            row.lambda_minus_base = res.lambda - base_res.lambda;
            row.eigenset_l1_distance = l1_distance(res.eigenset, base_res.eigenset);
            row.tv_mass = total_variation(res.u);
            row.eigenset_volume = res.eigenset_volume;
            row.duality_gap = res.residuals.duality_gap;
            row.inner_iterations = res.inner_iterations;
            row.domain = std::move(omega);
            row.eigenset = res.eigenset;
            rep.rows.push_back(std::move(row));
            (sgn > 0 ? lam_plus : lam_minus).push_back(res.lambda);
        }
    }

    rep.deltas = fam.deltas;
    for (std::size_t i = 0; i < fam.deltas.size(); ++i)
        rep.quotients.push_back((lam_plus[i] - lam_minus[i]) / (2.0 * fam.deltas[i]));

    // Derivative estimate from the smallest delta whose signal clears the
    // noise; fall back to the smallest delta outright.
    rep.derivative_estimate = rep.quotients.back();
    for (std::size_t i = fam.deltas.size(); i-- > 0;) {
        if (std::abs(lam_plus[i] - lam_minus[i]) > 3.0 * rep.noise_floor) {
            rep.derivative_estimate = rep.quotients[i];
            break;
        }
    }

    std::vector<Real> xs, ys;
    for (const SweepRow& r : rep.rows) {
        xs.push_back(r.delta);
        ys.push_back(r.lambda_minus_base);
    }
    rep.slope.driver = "delta";
    rep.slope.noise_floor = rep.noise_floor;
    rep.slope.theorem_tag = "diffeo:derivative";
    rep.slope.predicted_coefficient = rep.predicted_derivative;
    for (std::size_t i = 0; i < xs.size(); ++i) rep.slope.samples.push_back({xs[i], ys[i]});
    try {
        rep.slope.fit = fit_slope(xs, ys, FitModel::LinearThroughOrigin,
                                  rep.noise_floor, 1.0);
    } catch (const InsufficientSignalError&) {
        rep.slope.insufficient_signal = true;
        rep.slope.notes = "slope indistinguishable from 0";
    }

    const Real smallest = fam.deltas.back();
    const Real quotient_noise = rep.noise_floor / smallest;
    if (std::abs(rep.predicted_derivative) > 3.0 * quotient_noise) {
        rep.derivative_ok =
            std::abs(rep.derivative_estimate - rep.predicted_derivative) <=
            tol.derivative_rel * std::abs(rep.predicted_derivative) +
                3.0 * quotient_noise;
    } else {
        rep.derivative_ok = std::abs(rep.derivative_estimate) <= 3.0 * quotient_noise;
    }

    // Continuity: |lambda_delta - lambda0| decays as delta shrinks.
    std::vector<Real> errs;
    for (std::size_t i = 0; i < fam.deltas.size(); ++i)
        errs.push_back(std::max(std::abs(lam_plus[i] - rep.lambda0),
                                std::abs(lam_minus[i] - rep.lambda0)));
    rep.continuity_ok = true;
    for (std::size_t i = 1; i < errs.size(); ++i)
        if (errs[i] > errs[i - 1] * 1.05 + 3.0 * rep.noise_floor) rep.continuity_ok = false;

    std::ostringstream os;
    os << "derivative=" << rep.derivative_estimate
       << " predicted=" << rep.predicted_derivative << "; ";
    rep.detail += os.str();
    return rep;
}

// ---------------------------------------------------------------------------
// Capacity-controlled sequences
// ---------------------------------------------------------------------------

CapacitySequenceReport verify_capacity_sequence(
    const GridDomain& base, Real lambda0, const GridDomain& base_eigenset,
    Real base_tv_mass, const std::vector<SweepRow>& rows,
    const std::vector<Real>& closed_form_caps, const CapacityOptions& cap_opts,
    Real coefficient_tol) {
    CapacitySequenceReport rep;
    rep.min_eigenset_volume = std::numeric_limits<Real>::infinity();

    std::vector<Real> l1s, tvdiffs;
    Real prev_cap = std::numeric_limits<Real>::infinity();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const SweepRow& r = rows[i];
        CapacitySequenceRow row;
        row.delta = r.delta;
        const CompactSet hull = symmetric_difference_hull(base, r.domain);
        row.cap_hull = cap1_variational(hull, cap_opts).value;
        row.cap_closed_form = i < closed_form_caps.size()
                                  ? closed_form_caps[i]
                                  : std::numeric_limits<Real>::quiet_NaN();
        row.eigenset_volume = r.eigenset_volume;
        row.eigenset_l1_distance = l1_distance(r.eigenset, base_eigenset);
        row.tv_mass_diff = std::abs(r.tv_mass - base_tv_mass);
        row.coefficient = row.cap_hull > 1e-12
                              ? (r.lambda - lambda0) * r.eigenset_volume / row.cap_hull
                              : 0.0;

        rep.min_eigenset_volume = std::min(rep.min_eigenset_volume, r.eigenset_volume);
        if (row.coefficient < -coefficient_tol || row.coefficient > 1.0 + coefficient_tol) {
            rep.coefficients_ok = false;
            rep.detail += "coefficient " + fmt(row.coefficient) + " out of range at delta=" +
                          fmt(r.delta) + "; ";
        }
        if (row.cap_hull > prev_cap * (1.0 + 1e-9)) rep.capacity_decreasing = false;
        prev_cap = row.cap_hull;

        l1s.push_back(row.eigenset_l1_distance);
        tvdiffs.push_back(row.tv_mass_diff);
        rep.rows.push_back(row);
    }

    const Real vol_a = base_eigenset.volume();
    rep.l1_ok = decreasing_below(l1s, 0.02 * vol_a);
    rep.tv_mass_ok = decreasing_below(tvdiffs, 0.02 * lambda0);
    if (!rep.l1_ok) rep.detail += "eigenset L1 convergence failed; ";
    if (!rep.tv_mass_ok) rep.detail += "tv-mass convergence failed; ";
    return rep;
}

CapacitySequenceReport run_capacity_sequence(const HoleFamily& fam,
                                             const SolverOptions& solver,
                                             const CapacityOptions& cap_opts) {
    const HoleExperimentReport hole = run_hole_experiment(fam, {}, solver);
    std::vector<Real> closed;
    for (const Real d : fam.deltas) {
        Real cap = 0.0;
        for (const HoleSpec& h : fam.holes)
            cap += oracles::ball_capacity(fam.grid.dim, h.eps(d));
        closed.push_back(cap);
    }
    CapacitySequenceReport rep = verify_capacity_sequence(
        hole.base_domain, hole.lambda0, hole.base_eigenset, hole.base_tv_mass,
        hole.rows, closed, cap_opts);
    if (!rep.capacity_decreasing)
        throw FamilyError("capacity sequence: cap_1 of the symmetric difference "
                          "hull fails to decrease");
    return rep;
}

} // namespace cheeger
