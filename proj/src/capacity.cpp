#include "cheeger/capacity.hpp"

#include <cmath>

#include "cheeger/oracles.hpp"
#include "pd_kernel.hpp"

namespace cheeger {

namespace {

// True when occupancy touches the outermost cell layer.
bool touches_frame(const GridSpec& spec, const Eigen::ArrayXd& occ) {
    const int nx = spec.cells[0], ny = spec.cells[1], nz = spec.cells[2];
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const bool frame = i == 0 || i + 1 == nx || j == 0 || j + 1 == ny ||
                                   (spec.dim == 3 && (k == 0 || k + 1 == nz));
                if (frame && occ[spec.index(i, j, k)] > 0.0) return true;
            }
    return false;
}

// Largest value on the border ring of the box (inside the grid).
Real ring_max(const GridSpec& spec, const Eigen::ArrayXd& v, const CellBox& box) {
    Real m = 0.0;
    const int k0 = spec.dim == 3 ? box.lo[2] : 0;
    const int k1 = spec.dim == 3 ? box.hi[2] : 1;
    for (int k = k0; k < k1; ++k)
        for (int j = box.lo[1]; j < box.hi[1]; ++j)
            for (int i = box.lo[0]; i < box.hi[0]; ++i) {
                const bool ring = i == box.lo[0] || i + 1 == box.hi[0] ||
                                  j == box.lo[1] || j + 1 == box.hi[1] ||
                                  (spec.dim == 3 && (k == box.lo[2] || k + 1 == box.hi[2]));
                if (ring) m = std::max(m, v[spec.index(i, j, k)]);
            }
    return m;
}

CellBox interior_box(const GridSpec& spec) {
    CellBox b;
    b.lo = Eigen::Array3i(1, 1, spec.dim == 3 ? 1 : 0);
    b.hi = Eigen::Array3i(spec.cells[0] - 1, spec.cells[1] - 1,
                          spec.dim == 3 ? spec.cells[2] - 1 : 1);
    return b;
}

CellBox clip_to_interior(const CellBox& box, const GridSpec& spec) {
    const CellBox in = interior_box(spec);
    CellBox out = box;
    for (int a = 0; a < 3; ++a) {
        out.lo[a] = std::max(out.lo[a], in.lo[a]);
        out.hi[a] = std::min(out.hi[a], in.hi[a]);
    }
    if (spec.dim == 2) {
        out.lo[2] = 0;
        out.hi[2] = 1;
    }
    return out;
}

} // namespace

CapacityResult cap1_variational(const CompactSet& K, const CapacityOptions& opts) {
    K.spec.validate();
    if (touches_frame(K.spec, K.occupancy))
        throw BoundsError("cap1_variational: K touches the grid frame");

    CapacityResult res;
    CellBox support = support_box(K.spec, K.occupancy);
    if (support.empty()) return res; // empty K -> 0

    const Eigen::ArrayXd hi = Eigen::ArrayXd::Ones(K.spec.cell_count());

    CellBox box = clip_to_interior(support.expanded(opts.margin_cells, K.spec), K.spec);
    detail::PdState state;
    while (true) {
        detail::PdProblem prob;
        prob.spec = &K.spec;
        prob.lo = &K.occupancy;
        prob.hi = &hi;
        prob.linear = 0.0;
        prob.box = box;

        state.reset(K.spec);
        state.u = K.occupancy; // feasible start at the obstacle itself

        detail::PdOptions kopts;
        kopts.tol_gap_abs = opts.tol_gap;
        kopts.max_iters = opts.max_iters;

        const detail::PdOutcome out = detail::run_pd(prob, state, kopts);
        if (!out.converged)
            throw ConvergenceError("cap1_variational: no convergence", out.gap,
                                   out.iterations);

        // The minimizer shrink-wraps K; if it presses against the work box,
        // enlarge and resolve.
        const CellBox full = clip_to_interior(
            CellBox{Eigen::Array3i::Zero(),
                    Eigen::Array3i(K.spec.cells[0], K.spec.cells[1], K.spec.cells[2])},
            K.spec);
        const bool at_full = (box.lo <= full.lo).all() && (box.hi >= full.hi).all();
        if (!at_full && ring_max(K.spec, state.u, box) > 1e-6) {
            box = clip_to_interior(box.expanded(2 * opts.margin_cells, K.spec), K.spec);
            continue;
        }
        res.value = out.primal;
        res.gap = out.gap;
        res.iterations = out.iterations;
        return res;
    }
}

BallCapacity cap1_balls(const std::vector<Ball>& balls, int dim,
                        const GridSpec* spec_for_fallback,
                        const CapacityOptions& opts) {
    BallCapacity res;
    for (const Ball& b : balls)
        if (!(b.radius > 0.0))
            throw ConfigError("cap1_balls: radii must be positive");
    if (balls.empty()) return res;

    bool disjoint = true;
    for (std::size_t i = 0; i < balls.size() && disjoint; ++i)
        for (std::size_t j = i + 1; j < balls.size(); ++j) {
            Real d2 = 0.0;
            for (int a = 0; a < dim; ++a) {
                const Real d = balls[i].center[a] - balls[j].center[a];
                d2 += d * d;
            }
            const Real rsum = balls[i].radius + balls[j].radius;
            if (d2 <= rsum * rsum) {
                disjoint = false;
                break;
            }
        }

    if (disjoint) {
        for (const Ball& b : balls) {
            const Real term = oracles::ball_capacity(dim, b.radius);
            res.value += term;
            res.dominant_term = std::max(res.dominant_term, term);
        }
        return res;
    }

    if (!spec_for_fallback)
        throw ConfigError("cap1_balls: overlapping balls need a grid for the "
                          "variational fallback");
    const GridDomain K = rasterize(Shape{BallUnion{balls}}, *spec_for_fallback);
    const CapacityResult v = cap1_variational(K, opts);
    res.value = v.value;
    res.dominant_term = v.value;
    res.overlap_fallback = true;
    return res;
}

IsoperimetricBound isoperimetric_bound(const CompactSet& K,
                                       const CapacityOptions& opts) {
    IsoperimetricBound b;
    const int n = K.spec.dim;
    const Real vol = K.volume();
    if (vol <= 0.0) return b;
    b.lhs = std::pow(vol, static_cast<Real>(n - 1) / n);
    const Real cap = cap1_variational(K, opts).value;
    b.rhs = oracles::isoperimetric_capacity_constant(n) * cap;
    return b;
}

} // namespace cheeger
