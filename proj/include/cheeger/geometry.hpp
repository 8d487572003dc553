#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cheeger/grid.hpp"

namespace cheeger {

// ---------------------------------------------------------------------------
// Analytic shapes
// ---------------------------------------------------------------------------

struct Ball {
    Eigen::Array3d center{0, 0, 0};
    Real radius = 1.0;
};

/// Ball minus a smaller concentric closed ball.
struct Annulus {
    Eigen::Array3d center{0, 0, 0};
    Real outer = 1.0;
    Real inner = 0.2;
};

/// Axis-aligned box.
struct Rectangle {
    Eigen::Array3d lo{0, 0, 0};
    Eigen::Array3d hi{1, 1, 0};
};

/// The plane region (x^2 + y^2)^2 < a x^3 translated by `center` (2D only).
/// Not equal to its own Cheeger set, unlike balls and annuli.
struct Ovoid {
    Eigen::Array3d center{0, 0, 0};
    Real size = 1.0;
};

/// Union of balls; members may overlap (overlapping cells are supersampled).
struct BallUnion {
    std::vector<Ball> balls;
};

struct EmptyShape {};

using Shape = std::variant<EmptyShape, Ball, Annulus, Rectangle, Ovoid, BallUnion>;

/// Tight bounding box of the shape (lo, hi).
std::pair<Eigen::Array3d, Eigen::Array3d> shape_bounds(const Shape& s, int dim);

/// Exact volume when the shape has a closed form.
std::optional<Real> shape_volume(const Shape& s, int dim);

/// Exact perimeter / surface measure when known.
std::optional<Real> shape_perimeter(const Shape& s, int dim);

// ---------------------------------------------------------------------------
// GridDomain
// ---------------------------------------------------------------------------

/// Provenance tag kept alongside the occupancy field.
struct Analytic {
    enum class Kind { Generic, Empty, Ball, Annulus, Rectangle, Ovoid };
    Kind kind = Kind::Generic;
    std::optional<Real> volume;
    std::optional<Real> perimeter;
    // Shape parameters, meaningful for Ball / Annulus / Rectangle only.
    Eigen::Array3d center{0, 0, 0};
    Real radius = 0.0;
    Real inner = 0.0;
    Eigen::Array3d lo{0, 0, 0};
    Eigen::Array3d hi{0, 0, 0};

    static Analytic generic() { return Analytic{}; }
};

std::string to_string(Analytic::Kind k);

/// Bounded domain stored as an anti-aliased occupancy field: each cell holds
/// the fraction of its volume covered by the domain, in [0, 1].
struct GridDomain {
    GridSpec spec;
    Eigen::ArrayXd occupancy; // flat, size spec.cell_count()
    Analytic analytic;

    Real volume() const { return occupancy.sum() * spec.cell_volume(); }
};

/// Same representation; tags the set as a compact K whose capacity is sought.
using CompactSet = GridDomain;

struct Measure {
    Real volume = 0.0;
    Real perimeter = 0.0;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Rasterize an analytic shape to fractional cell coverage. Coverage is exact
/// (closed form) for 2D balls, annuli and rectangles; 3D balls integrate the
/// exact 2D slice formula; implicit shapes fall back to midpoint
/// supersampling at >= 16 samples per axis. Interior cells are exactly 1,
/// exterior cells exactly 0.
///
/// Throws BoundsError when the shape does not fit with margin >= 4h.
GridDomain rasterize(const Shape& shape, const GridSpec& spec);

/// Ω \ K, cellwise max(0, occ_domain - occ_holes). The analytic tag survives
/// only when the result is a known annulus (concentric ball minus ball).
GridDomain subtract(const GridDomain& domain, const CompactSet& holes);

/// Closure of (A Δ B): |occ_a - occ_b| followed by one grey-scale dilation of
/// radius h (max over the 2*dim+1 cell cross).
CompactSet symmetric_difference_hull(const GridDomain& a, const GridDomain& b);

/// Volume Σ occ h^n and perimeter as the isotropic discrete total variation
/// of the occupancy field (same functional the solver minimizes).
Measure measure(const GridDomain& domain);

/// One pass of a (2*dim+1)-point mean filter; keeps values in [0, 1].
GridDomain smooth(const GridDomain& domain, int passes = 1);

/// Axis-aligned bounding box (inclusive lo, exclusive hi) of cells with
/// occupancy > threshold. Empty box has hi == lo.
struct CellBox {
    Eigen::Array3i lo{0, 0, 0};
    Eigen::Array3i hi{0, 0, 0};

    bool empty() const { return (hi <= lo).any(); }
    CellBox expanded(int cells, const GridSpec& spec) const;
};

CellBox support_box(const GridSpec& spec, const Eigen::ArrayXd& values,
                    Real threshold = 0.0);

/// Exact area of {|x - center| <= r} ∩ cell, divided by the cell area (2D),
/// and its 3D counterpart via slice quadrature. Exposed for tests.
Real ball_cell_coverage(const Ball& b, const GridSpec& spec, int i, int j, int k);

} // namespace cheeger
