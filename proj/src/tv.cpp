#include "cheeger/tv.hpp"

#include <cmath>

namespace cheeger {

ScalarField ScalarField::zeros(const GridSpec& spec) {
    ScalarField f;
    f.spec = spec;
    f.values = Eigen::ArrayXd::Zero(spec.cell_count());
    f.support = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(spec.cell_count(), true);
    return f;
}

ScalarField ScalarField::full(const GridSpec& spec, const Eigen::ArrayXd& values) {
    ScalarField f;
    f.spec = spec;
    f.values = values;
    f.support = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(spec.cell_count(), true);
    return f;
}

void ScalarField::apply_support() {
    values = support.select(values, 0.0);
}

VectorField VectorField::zeros(const GridSpec& spec) {
    VectorField p;
    p.spec = spec;
    for (int a = 0; a < spec.dim; ++a)
        p.comp[a] = Eigen::ArrayXd::Zero(spec.cell_count());
    return p;
}

Real VectorField::max_norm() const {
    Eigen::ArrayXd n2 = comp[0].square();
    for (int a = 1; a < spec.dim; ++a) n2 += comp[a].square();
    return n2.size() ? std::sqrt(n2.maxCoeff()) : 0.0;
}

VectorField grad(const ScalarField& u) {
    const GridSpec& spec = u.spec;
    VectorField g = VectorField::zeros(spec);
    const int nx = spec.cells[0], ny = spec.cells[1], nz = spec.cells[2];
    const Real inv_h = 1.0 / spec.spacing;
    const Real* v = u.values.data();
    const std::int64_t sy = nx, sz = static_cast<std::int64_t>(nx) * ny;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j) {
            std::int64_t row = spec.index(0, j, k);
            for (int i = 0; i < nx; ++i) {
                const std::int64_t idx = row + i;
                const Real c = v[idx];
                g.comp[0][idx] = ((i + 1 < nx ? v[idx + 1] : 0.0) - c) * inv_h;
                g.comp[1][idx] = ((j + 1 < ny ? v[idx + sy] : 0.0) - c) * inv_h;
                if (spec.dim == 3)
                    g.comp[2][idx] = ((k + 1 < nz ? v[idx + sz] : 0.0) - c) * inv_h;
            }
        }
    return g;
}

ScalarField divergence(const VectorField& p) {
    const GridSpec& spec = p.spec;
    ScalarField d = ScalarField::zeros(spec);
    const int nx = spec.cells[0], ny = spec.cells[1], nz = spec.cells[2];
    const Real inv_h = 1.0 / spec.spacing;
    const Real* px = p.comp[0].data();
    const Real* py = p.comp[1].data();
    const Real* pz = spec.dim == 3 ? p.comp[2].data() : nullptr;
    const std::int64_t sy = nx, sz = static_cast<std::int64_t>(nx) * ny;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j) {
            std::int64_t row = spec.index(0, j, k);
            for (int i = 0; i < nx; ++i) {
                const std::int64_t idx = row + i;
                Real s = px[idx] - (i > 0 ? px[idx - 1] : 0.0);
                s += py[idx] - (j > 0 ? py[idx - sy] : 0.0);
                if (pz) s += pz[idx] - (k > 0 ? pz[idx - sz] : 0.0);
                d.values[idx] = s * inv_h;
            }
        }
    return d;
}

namespace {

// Forward-difference part: Σ ||(one-sided jumps)||_2, raw (times h^{n-1} later).
Real forward_jump_sum(const GridSpec& spec, const Real* v) {
    const int nx = spec.cells[0], ny = spec.cells[1], nz = spec.cells[2];
    const std::int64_t sy = nx, sz = static_cast<std::int64_t>(nx) * ny;
    Real sum = 0.0;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j) {
            std::int64_t row = spec.index(0, j, k);
            for (int i = 0; i < nx; ++i) {
                const std::int64_t idx = row + i;
                const Real c = v[idx];
                const Real dx = (i + 1 < nx ? v[idx + 1] : 0.0) - c;
                const Real dy = (j + 1 < ny ? v[idx + sy] : 0.0) - c;
                Real n2 = dx * dx + dy * dy;
                if (spec.dim == 3) {
                    const Real dz = (k + 1 < nz ? v[idx + sz] : 0.0) - c;
                    n2 += dz * dz;
                }
                sum += std::sqrt(n2);
            }
        }
    return sum;
}

// Node-averaged part: gradients at cell corners, each component the mean of
// the parallel one-sided differences of the surrounding 2^dim block. Nodes
// one layer outside the grid see zeros (the extension).
Real node_jump_sum(const GridSpec& spec, const Real* v) {
    const int nx = spec.cells[0], ny = spec.cells[1], nz = spec.cells[2];
    auto at = [&](int i, int j, int k) -> Real {
        if (i < 0 || j < 0 || k < 0 || i >= nx || j >= ny || k >= nz) return 0.0;
        return v[spec.index(i, j, k)];
    };
    Real sum = 0.0;
    if (spec.dim == 2) {
        for (int j = -1; j < ny; ++j)
            for (int i = -1; i < nx; ++i) {
                const Real u00 = at(i, j, 0), u10 = at(i + 1, j, 0);
                const Real u01 = at(i, j + 1, 0), u11 = at(i + 1, j + 1, 0);
                const Real gx = 0.5 * ((u10 - u00) + (u11 - u01));
                const Real gy = 0.5 * ((u01 - u00) + (u11 - u10));
                sum += std::sqrt(gx * gx + gy * gy);
            }
        return sum;
    }
    for (int k = -1; k < nz; ++k)
        for (int j = -1; j < ny; ++j)
            for (int i = -1; i < nx; ++i) {
                Real g[3] = {0, 0, 0};
                for (int db = 0; db <= 1; ++db)
                    for (int dc = 0; dc <= 1; ++dc) {
                        g[0] += at(i + 1, j + db, k + dc) - at(i, j + db, k + dc);
                        g[1] += at(i + db, j + 1, k + dc) - at(i + db, j, k + dc);
                        g[2] += at(i + db, j + dc, k + 1) - at(i + db, j + dc, k);
                    }
                sum += 0.25 * std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
            }
    return sum;
}

} // namespace

Real total_variation(const GridSpec& spec, const Eigen::ArrayXd& values) {
    const Real* v = values.data();
    const Real fwd = forward_jump_sum(spec, v);
    const Real node = node_jump_sum(spec, v);
    return ((1.0 - kNodeWeight) * fwd + kNodeWeight * node) * spec.face_area();
}

Real total_variation(const ScalarField& u) {
    return total_variation(u.spec, u.values);
}

VectorField node_grad(const ScalarField& u) {
    const GridSpec& spec = u.spec;
    VectorField g = VectorField::zeros(spec);
    const int nx = spec.cells[0], ny = spec.cells[1], nz = spec.cells[2];
    const Real inv_h = 1.0 / spec.spacing;
    const Real* v = u.values.data();
    auto at = [&](int i, int j, int k) -> Real {
        if (i < 0 || j < 0 || k < 0 || i >= nx || j >= ny || k >= nz) return 0.0;
        return v[spec.index(i, j, k)];
    };
    if (spec.dim == 2) {
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const Real u00 = at(i, j, 0), u10 = at(i + 1, j, 0);
                const Real u01 = at(i, j + 1, 0), u11 = at(i + 1, j + 1, 0);
                const auto idx = spec.index(i, j, 0);
                g.comp[0][idx] = 0.5 * ((u10 - u00) + (u11 - u01)) * inv_h;
                g.comp[1][idx] = 0.5 * ((u01 - u00) + (u11 - u10)) * inv_h;
            }
        return g;
    }
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                Real gx = 0, gy = 0, gz = 0;
                for (int db = 0; db <= 1; ++db)
                    for (int dc = 0; dc <= 1; ++dc) {
                        gx += at(i + 1, j + db, k + dc) - at(i, j + db, k + dc);
                        gy += at(i + db, j + 1, k + dc) - at(i + db, j, k + dc);
                        gz += at(i + db, j + dc, k + 1) - at(i + db, j + dc, k);
                    }
                const auto idx = spec.index(i, j, k);
                g.comp[0][idx] = 0.25 * gx * inv_h;
                g.comp[1][idx] = 0.25 * gy * inv_h;
                g.comp[2][idx] = 0.25 * gz * inv_h;
            }
    return g;
}

ScalarField node_divergence(const VectorField& q) {
    const GridSpec& spec = q.spec;
    ScalarField d = ScalarField::zeros(spec);
    const int nx = spec.cells[0], ny = spec.cells[1], nz = spec.cells[2];
    const Real inv_h = 1.0 / spec.spacing;
    auto at = [&](const Eigen::ArrayXd& a, int i, int j, int k) -> Real {
        if (i < 0 || j < 0 || k < 0 || i >= nx || j >= ny || k >= nz) return 0.0;
        return a[spec.index(i, j, k)];
    };
    if (spec.dim == 2) {
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const Real divx = at(q.comp[0], i, j, 0) - at(q.comp[0], i - 1, j, 0) +
                                  at(q.comp[0], i, j - 1, 0) - at(q.comp[0], i - 1, j - 1, 0);
                const Real divy = at(q.comp[1], i, j, 0) + at(q.comp[1], i - 1, j, 0) -
                                  at(q.comp[1], i, j - 1, 0) - at(q.comp[1], i - 1, j - 1, 0);
                d.values[spec.index(i, j, 0)] = 0.5 * (divx + divy) * inv_h;
            }
        return d;
    }
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                Real s = 0.0;
                for (int db = -1; db <= 0; ++db)
                    for (int dc = -1; dc <= 0; ++dc) {
                        s += at(q.comp[0], i, j + db, k + dc) -
                             at(q.comp[0], i - 1, j + db, k + dc);
                        s += at(q.comp[1], i + db, j, k + dc) -
                             at(q.comp[1], i + db, j - 1, k + dc);
                        s += at(q.comp[2], i + db, j + dc, k) -
                             at(q.comp[2], i + db, j + dc, k - 1);
                    }
                d.values[spec.index(i, j, k)] = 0.25 * s * inv_h;
            }
    return d;
}

VectorField project_unit_ball(VectorField p) {
    const std::int64_t n = p.comp[0].size();
    Real* px = p.comp[0].data();
    Real* py = p.comp[1].data();
    Real* pz = p.spec.dim == 3 ? p.comp[2].data() : nullptr;
    for (std::int64_t idx = 0; idx < n; ++idx) {
        Real n2 = px[idx] * px[idx] + py[idx] * py[idx];
        if (pz) n2 += pz[idx] * pz[idx];
        if (n2 > 1.0) {
            const Real inv = 1.0 / std::sqrt(n2);
            px[idx] *= inv;
            py[idx] *= inv;
            if (pz) pz[idx] *= inv;
        }
    }
    return p;
}

} // namespace cheeger
