#pragma once

#include <vector>

#include "cheeger/geometry.hpp"

namespace cheeger {

struct CapacityOptions {
    Real tol_gap = 1e-7;   // absolute primal-dual gap target
    long max_iters = 400000;
    int margin_cells = 12; // work box padding around K
};

struct CapacityResult {
    Real value = 0.0; // optimal tv, the 1-capacity estimate
    Real gap = 0.0;
    long iterations = 0;
    bool overlap_fallback = false; // cap1_balls fell back to the variational route
};

/// Variational 1-capacity: minimize tv(v) over v in [0,1] with v >= occ_K
/// cellwise and v = 0 on the grid frame. Same primal-dual scheme as the inner
/// Cheeger solve, with the added pointwise lower bound.
///
/// Throws BoundsError when K touches the grid frame.
CapacityResult cap1_variational(const CompactSet& K, const CapacityOptions& opts = {});

/// Closed form Σ_i ω_{n-1} eps_i^{n-1} for pairwise disjoint balls; also
/// returns the dominant term. Overlapping balls fall back to the variational
/// estimate on `spec` with the overlap flag set.
struct BallCapacity {
    Real value = 0.0;
    Real dominant_term = 0.0;
    bool overlap_fallback = false;
};

BallCapacity cap1_balls(const std::vector<Ball>& balls, int dim,
                        const GridSpec* spec_for_fallback = nullptr,
                        const CapacityOptions& opts = {});

/// Both sides of the capacitary isoperimetric inequality
/// |K|^{(n-1)/n} <= C cap_1(K), with the sharp (ball) constant folded into
/// the right-hand side so that lhs == rhs for balls.
struct IsoperimetricBound {
    Real lhs = 0.0;
    Real rhs = 0.0;
};

IsoperimetricBound isoperimetric_bound(const CompactSet& K,
                                       const CapacityOptions& opts = {});

} // namespace cheeger
