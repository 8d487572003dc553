#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>

#include "cheeger/errors.hpp"

namespace cheeger {

using Real = double;

/// Uniform cell-centered grid over a rectangular box in 2 or 3 dimensions.
///
/// Cells are indexed (i, j, k) with x fastest; the center of cell (i, j, k)
/// is origin + (i + 1/2, j + 1/2, k + 1/2) * h. In 2D the z axis carries a
/// single cell and is ignored by all geometry.
struct GridSpec {
    int dim = 2;
    Eigen::Array3i cells{0, 0, 1};
    Eigen::Array3d origin{0.0, 0.0, 0.0};
    Real spacing = 0.0;

    std::int64_t cell_count() const {
        return static_cast<std::int64_t>(cells[0]) * cells[1] * cells[2];
    }

    std::int64_t index(int i, int j, int k = 0) const {
        return (static_cast<std::int64_t>(k) * cells[1] + j) * cells[0] + i;
    }

    Eigen::Array3d cell_center(int i, int j, int k = 0) const {
        return origin + (Eigen::Array3d(i, j, k) + 0.5) * spacing;
    }

    /// Low corner of cell (i, j, k).
    Eigen::Array3d cell_lo(int i, int j, int k = 0) const {
        return origin + Eigen::Array3d(i, j, k) * spacing;
    }

    Eigen::Array3d box_lo() const { return origin; }

    Eigen::Array3d box_hi() const {
        return origin + cells.cast<double>() * spacing;
    }

    Real cell_volume() const {
        Real v = 1.0;
        for (int a = 0; a < dim; ++a) v *= spacing;
        return v;
    }

    /// h^(dim-1); the factor converting summed jump magnitudes to perimeter.
    Real face_area() const {
        Real v = 1.0;
        for (int a = 0; a + 1 < dim; ++a) v *= spacing;
        return v;
    }

    bool same_as(const GridSpec& o) const {
        return dim == o.dim && (cells == o.cells).all() && spacing == o.spacing &&
               (origin == o.origin).all();
    }

    /// Throws ResolutionError / ConfigError for malformed specs.
    void validate() const;
};

/// Grid covering `lo..hi` inflated by `margin` on every side, with
/// `resolution` cells along the longest axis and the same spacing elsewhere.
GridSpec make_grid(int dim, const Eigen::Array3d& lo, const Eigen::Array3d& hi,
                   int resolution, Real margin);

} // namespace cheeger
