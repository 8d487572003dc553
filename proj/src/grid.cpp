#include "cheeger/grid.hpp"

#include <cmath>
#include <string>

namespace cheeger {

void GridSpec::validate() const {
    if (dim != 2 && dim != 3)
        throw ConfigError("grid: dim must be 2 or 3, got " + std::to_string(dim));
    if (!(spacing > 0.0))
        throw ConfigError("grid: spacing must be positive");
    for (int a = 0; a < dim; ++a) {
        if (cells[a] < 16)
            throw ResolutionError("grid: need at least 16 cells per axis, got " +
                                  std::to_string(cells[a]) + " on axis " +
                                  std::to_string(a));
    }
    if (dim == 2 && cells[2] != 1)
        throw ConfigError("grid: 2D spec must have a single z cell");
    if (dim == 3 && cells[2] < 16)
        throw ResolutionError("grid: need at least 16 cells per axis");
}

GridSpec make_grid(int dim, const Eigen::Array3d& lo, const Eigen::Array3d& hi,
                   int resolution, Real margin) {
    if (resolution < 16) throw ResolutionError("make_grid: resolution below minimum of 16");
    if (margin < 0.0) throw ConfigError("make_grid: margin must be nonnegative");

    GridSpec spec;
    spec.dim = dim;
    Eigen::Array3d extent = Eigen::Array3d::Zero();
    Real longest = 0.0;
    for (int a = 0; a < dim; ++a) {
        extent[a] = hi[a] - lo[a] + 2.0 * margin;
        if (extent[a] <= 0.0) throw ConfigError("make_grid: empty bounding box");
        longest = std::max(longest, extent[a]);
    }
    spec.spacing = longest / resolution;
    for (int a = 0; a < dim; ++a) {
        const Real q = extent[a] / spec.spacing;
        int n = static_cast<int>(std::ceil(q - 1e-9));
        n = std::max(n, 16);
        spec.cells[a] = n;
        const Real center = 0.5 * (lo[a] + hi[a]);
        spec.origin[a] = center - 0.5 * n * spec.spacing;
    }
    if (dim == 2) {
        spec.cells[2] = 1;
        spec.origin[2] = 0.0;
    }
    spec.validate();
    return spec;
}

} // namespace cheeger
