#include "cheeger/solver.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "cheeger/oracles.hpp"
#include "pd_kernel.hpp"

namespace cheeger {

namespace {

detail::PdState make_kernel_state(const GridSpec& spec, SolverState* state) {
    detail::PdState ks;
    if (state && state->valid) {
        ks.u = state->u;
        ks.p = state->p;
        ks.q = state->q;
        ks.valid = true;
    } else {
        ks.reset(spec);
        ks.valid = false; // reset below with the proper initialization
    }
    return ks;
}

void store_state(const detail::PdState& ks, SolverState* state) {
    if (!state) return;
    state->u = ks.u;
    state->p = ks.p;
    state->q = ks.q;
    state->valid = true;
}

// u0 = occupancy normalized to unit mass, clamped into the box; p0 = 0
// (or a seeded uniform draw projected onto the unit ball).
void initialize_state(detail::PdState& ks, const GridDomain& domain,
                      const SolverOptions& opts) {
    // Start at the indicator itself (the Dinkelbach competitor behind
    // lambda_0) and point the duals along its gradient; both cut the
    // cold-start transient considerably.
    ks.u = domain.occupancy;
    ScalarField occ = ScalarField::full(domain.spec, domain.occupancy);
    const VectorField gf = grad(occ);
    const VectorField gn = node_grad(occ);
    for (int a = 0; a < domain.spec.dim; ++a) {
        ks.p[a] = gf.comp[a];
        ks.q[a] = gn.comp[a];
    }
    const auto normalize = [&](std::array<Eigen::ArrayXd, 3>& part) {
        const auto n = domain.spec.cell_count();
        for (std::int64_t idx = 0; idx < n; ++idx) {
            Real n2 = 0.0;
            for (int a = 0; a < domain.spec.dim; ++a) n2 += part[a][idx] * part[a][idx];
            if (n2 > 1e-24) {
                const Real inv = 1.0 / std::sqrt(n2);
                for (int a = 0; a < domain.spec.dim; ++a) part[a][idx] *= inv;
            }
        }
    };
    normalize(ks.p);
    normalize(ks.q);
    if (opts.seed != 0) {
        std::mt19937_64 rng(opts.seed);
        std::uniform_real_distribution<Real> dist(-0.5, 0.5);
        const auto n = domain.spec.cell_count();
        for (auto* part : {&ks.p, &ks.q}) {
            for (int a = 0; a < domain.spec.dim; ++a)
                for (std::int64_t i = 0; i < n; ++i) (*part)[a][i] = dist(rng);
            for (std::int64_t idx = 0; idx < n; ++idx) {
                Real n2 = 0.0;
                for (int a = 0; a < domain.spec.dim; ++a)
                    n2 += (*part)[a][idx] * (*part)[a][idx];
                if (n2 > 1.0) {
                    const Real inv = 1.0 / std::sqrt(n2);
                    for (int a = 0; a < domain.spec.dim; ++a) (*part)[a][idx] *= inv;
                }
            }
        }
    }
    ks.valid = true;
}

ScalarField field_from(const GridDomain& domain, Eigen::ArrayXd values) {
    ScalarField f;
    f.spec = domain.spec;
    f.values = std::move(values);
    f.support = domain.occupancy > 0.0;
    return f;
}

VectorField part_field(const GridSpec& spec, const std::array<Eigen::ArrayXd, 3>& p) {
    VectorField v;
    v.spec = spec;
    for (int a = 0; a < spec.dim; ++a) v.comp[a] = p[a];
    return v;
}

// Combined certificate: (1-w) p_fwd + w * (mean of the 2^dim adjacent node
// duals); a convex combination of unit-ball fields, so |Λ| <= 1 pointwise.
VectorField combined_certificate(const GridSpec& spec,
                                 const std::array<Eigen::ArrayXd, 3>& pf,
                                 const std::array<Eigen::ArrayXd, 3>& qn) {
    VectorField out = VectorField::zeros(spec);
    const int nx = spec.cells[0], ny = spec.cells[1], nz = spec.cells[2];
    auto at = [&](const Eigen::ArrayXd& arr, int i, int j, int k) -> Real {
        if (i < 0 || j < 0 || k < 0 || i >= nx || j >= ny || k >= nz) return 0.0;
        return arr[spec.index(i, j, k)];
    };
    const int corners = spec.dim == 2 ? 4 : 8;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const auto idx = spec.index(i, j, k);
                for (int a = 0; a < spec.dim; ++a) {
                    Real mean = 0.0;
                    for (int dk = -(spec.dim == 3); dk <= 0; ++dk)
                        for (int dj = -1; dj <= 0; ++dj)
                            for (int di = -1; di <= 0; ++di)
                                mean += at(qn[a], i + di, j + dj, k + dk);
                    out.comp[a][idx] = (1.0 - kNodeWeight) * pf[a][idx] +
                                       kNodeWeight * mean / corners;
                }
            }
    return out;
}

} // namespace

/// Composite divergence -K^T of the blended operator, the quantity whose
/// deviation from -lambda the certificate check measures.
static ScalarField blended_divergence(const VectorField& pf, const VectorField& qn) {
    const ScalarField df = divergence(pf);
    const ScalarField dn = node_divergence(qn);
    ScalarField out = df;
    out.values = (1.0 - kNodeWeight) * df.values + kNodeWeight * dn.values;
    return out;
}

InnerResult inner_pd(const GridDomain& domain, Real lambda, SolverState* warm,
                     const SolverOptions& opts) {
    if (!(lambda > 0)) throw ConfigError("inner_pd: lambda must be positive");
    const Real vol = domain.volume();

    detail::PdProblem prob;
    prob.spec = &domain.spec;
    prob.hi = &domain.occupancy;
    prob.linear = lambda;
    prob.box = support_box(domain.spec, domain.occupancy);

    detail::PdState ks = make_kernel_state(domain.spec, warm);
    if (!ks.valid) initialize_state(ks, domain, opts);

    detail::PdOptions kopts;
    kopts.tol_gap_abs = opts.tol_inner * std::max(vol, 1e-12);
    kopts.max_iters = opts.max_inner;
    kopts.stall_tol = opts.stall_tol;

    detail::PdOutcome out = detail::run_pd(prob, ks, kopts);
    if (!out.converged)
        throw ConvergenceError("inner_pd: no convergence within max_inner iterations",
                               out.gap / std::max(vol, 1e-12), out.iterations);

    store_state(ks, warm);

    InnerResult res;
    res.u = field_from(domain, ks.u);
    res.dual = combined_certificate(domain.spec, ks.p, ks.q);
    res.dual_fwd = part_field(domain.spec, ks.p);
    res.dual_node = part_field(domain.spec, ks.q);
    res.value = out.primal;
    res.tv_value = out.tv_value;
    res.mass = out.mass;
    res.gap = out.gap / std::max(vol, 1e-12);
    res.iterations = out.iterations;
    return res;
}

GridDomain extract_eigenset(const ScalarField& u, int threshold_count, Real* ratio_out) {
    const GridSpec& spec = u.spec;
    std::vector<Real> positives;
    positives.reserve(u.values.size());
    for (std::int64_t i = 0; i < u.values.size(); ++i)
        if (u.values[i] > 0.0) positives.push_back(u.values[i]);
    if (positives.empty())
        throw DegenerateDomainError("extract_eigenset: eigenfunction vanishes");
    std::sort(positives.begin(), positives.end());

    auto quantile = [&](Real q) {
        const Real pos = q * (positives.size() - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const auto hi = std::min(lo + 1, positives.size() - 1);
        const Real w = pos - lo;
        return (1.0 - w) * positives[lo] + w * positives[hi];
    };

    // Plateau level of the (nearly flat-topped) eigenfunction; thresholds scan
    // the quantiles below it.
    const Real plateau = quantile(0.95);
    std::vector<Real> thresholds;
    for (int t = 0; t < threshold_count; ++t) {
        const Real q = (t + 0.5) / threshold_count;
        const Real level = quantile(q);
        if (level < plateau * (1.0 - 1e-9)) thresholds.push_back(level);
    }
    if (thresholds.empty()) thresholds.push_back(plateau * 0.5);
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                     thresholds.end());

    const Real cell_vol = spec.cell_volume();
    Eigen::ArrayXd best;
    Real best_ratio = std::numeric_limits<Real>::infinity();
    Real best_volume = 0.0;
    for (const Real t : thresholds) {
        // Fractional coverage of {u > t}, read off the eigenfunction's own
        // transition band between t and the plateau.
        Eigen::ArrayXd w = ((u.values - t) / (plateau - t)).cwiseMax(0.0).cwiseMin(1.0);
        const Real volume = w.sum() * cell_vol;
        if (volume <= 0.0) continue;
        const Real per = total_variation(spec, w);
        const Real ratio = per / volume;
        const bool better = ratio < best_ratio - 1e-9 ||
                            (ratio < best_ratio + 1e-9 && volume > best_volume);
        if (better) {
            best_ratio = ratio;
            best_volume = volume;
            best = std::move(w);
        }
    }
    if (!best.size())
        throw DegenerateDomainError("extract_eigenset: all superlevel sets empty");

    GridDomain set;
    set.spec = spec;
    set.occupancy = std::move(best);
    set.analytic = Analytic::generic();
    if (ratio_out) *ratio_out = best_ratio;
    return set;
}

CertificateReport check_certificate(const EigenResult& res, Real threshold) {
    CertificateReport rep;
    rep.threshold = threshold;
    const GridSpec& spec = res.u.spec;
    const Real cell_vol = spec.cell_volume();

    const ScalarField divp = blended_divergence(res.dual_fwd, res.dual_node);
    Real weighted = 0.0, mass = 0.0, pairing = 0.0;
    for (std::int64_t i = 0; i < res.u.values.size(); ++i) {
        const Real ui = res.u.values[i];
        pairing += ui * divp.values[i];
        if (ui <= 0.0) continue;
        weighted += ui * std::abs(-divp.values[i] - res.lambda);
        mass += ui;
    }
    rep.div_residual = mass > 0 ? weighted / mass : 0.0;

    // <K u, p> = <u, K^T p> = -<u, div p>; alignment compares it against tv(u).
    pairing *= -cell_vol;
    const Real tv = total_variation(res.u);
    rep.alignment = tv > 0 ? 1.0 - pairing / tv : 0.0;

    rep.max_dual_norm = res.dual.max_norm();
    rep.div_ok = rep.div_residual <= threshold * res.lambda;
    rep.alignment_ok = rep.alignment <= threshold;
    rep.dual_norm_ok = rep.max_dual_norm <= 1.0 + 1e-9;
    return rep;
}

EigenResult solve(const GridDomain& domain, const SolverOptions& opts,
                  SolverState* state) {
    const Measure m = measure(domain);
    if (!(m.volume > 0.0))
        throw DegenerateDomainError("solve: domain has zero volume");

    const CellBox box = support_box(domain.spec, domain.occupancy);
    for (int a = 0; a < domain.spec.dim; ++a)
        if (box.hi[a] - box.lo[a] < 4)
            throw ResolutionError("solve: domain thinner than 4 cells along axis " +
                                  std::to_string(a));

    EigenResult res;
    res.upper_bound = m.perimeter / m.volume;
    res.lower_bound = oracles::lower_bound(domain.spec.dim, m.volume);

    SolverState local;
    SolverState* st = state ? state : &local;
    if (!opts.warm_start) st->valid = false;

    Real lambda = res.upper_bound;
    res.lambda_history.push_back(lambda);

    InnerResult inner;
    bool converged = false;
    for (int outer = 0; outer < opts.max_outer; ++outer) {
        inner = inner_pd(domain, lambda, st, opts);
        res.inner_iterations += inner.iterations;
        ++res.outer_iterations;

        if (inner.value >= -opts.tol_outer * lambda) {
            converged = true;
            break;
        }
        if (!(inner.mass > 0))
            throw ConvergenceError("solve: inner minimizer lost all mass", inner.gap,
                                   res.inner_iterations);
        lambda = inner.tv_value / inner.mass;
        res.lambda_history.push_back(lambda);
    }
    if (!converged)
        throw ConvergenceError("solve: Dinkelbach iteration did not settle within max_outer steps",
                               inner.gap, res.inner_iterations);

    res.lambda = lambda;
    res.dual = std::move(inner.dual);
    res.dual_fwd = std::move(inner.dual_fwd);
    res.dual_node = std::move(inner.dual_node);
    res.residuals.duality_gap = inner.gap;

    // Normalize the eigenfunction to unit mass.
    res.u = std::move(inner.u);
    const Real mass = res.u.mass();
    if (!(mass > 0))
        throw ConvergenceError("solve: converged to the zero function", inner.gap,
                               res.inner_iterations);
    res.u.values /= mass;

    Real ratio = 0.0;
    res.eigenset = extract_eigenset(res.u, opts.threshold_count, &ratio);
    res.eigenset_ratio = ratio;
    res.eigenset_volume = res.eigenset.volume();
    res.residuals.ratio_mismatch = std::abs(ratio - lambda);

    const CertificateReport cert = check_certificate(res, opts.certificate_tol);
    res.residuals.div_residual = cert.div_residual;
    res.residuals.alignment = cert.alignment;
    return res;
}

bool validate_result(const EigenResult& res, const GridDomain& domain,
                     const SolverOptions& opts, std::string* why) {
    std::ostringstream msg;
    bool ok = true;
    auto fail = [&](const std::string& s) {
        if (!ok) msg << "; ";
        msg << s;
        ok = false;
    };

    if ((res.u.values < 0.0).any()) fail("eigenfunction has negative values");
    const Real mass = res.u.mass();
    if (std::abs(mass - 1.0) > 1e-9) fail("eigenfunction mass deviates from 1");
    if (res.lambda < res.lower_bound * (1.0 - opts.bounds_tol))
        fail("lambda below the symmetrization lower bound");
    if (res.lambda > res.upper_bound * (1.0 + opts.bounds_tol) + 1e-12)
        fail("lambda above perimeter/volume");
    if (res.residuals.ratio_mismatch > 0.05 * res.lambda)
        fail("eigenset ratio mismatch above 5%");
    if (res.dual.max_norm() > 1.0 + 1e-9) fail("dual field exceeds the unit ball");
    for (std::size_t i = 1; i < res.lambda_history.size(); ++i)
        if (res.lambda_history[i] > res.lambda_history[i - 1] + 1e-12) {
            fail("Dinkelbach sequence not monotone");
            break;
        }
    (void)domain;
    if (why) *why = msg.str();
    return ok;
}

} // namespace cheeger
