#include "cheeger/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include "cheeger/oracles.hpp"
#include "cheeger/tv.hpp"

namespace cheeger {

namespace {

constexpr Real kPi = std::numbers::pi;

// --- exact circle/box coverage ---------------------------------------------

// Antiderivative of sqrt(r^2 - x^2) on [-r, r], extended constant outside.
Real half_disk_integral(Real x, Real r) {
    const Real t = std::clamp(x, -r, r);
    return 0.5 * (t * std::sqrt(std::max(0.0, r * r - t * t)) +
                  r * r * std::asin(std::clamp(t / r, -1.0, 1.0)));
}

// Integral of sqrt(max(0, r^2 - X^2)) over [a, b].
Real arc_integral(Real a, Real b, Real r) {
    if (b <= a) return 0.0;
    return half_disk_integral(b, r) - half_disk_integral(a, r);
}

// Area of {X^2 + Y^2 <= r^2, X <= x, Y <= y} for a circle centered at the
// origin.
Real circle_quarter_area(Real x, Real y, Real r) {
    if (r <= 0.0 || x <= -r || y <= -r) return 0.0;
    const Real xm = std::min(x, r);
    if (y >= 0.0) {
        const Real s = std::sqrt(std::max(0.0, r * r - y * y));
        Real area = arc_integral(-r, std::min(xm, -s), r); // where c(X) < y
        const Real plateau_hi = std::min(xm, s);
        if (plateau_hi > -s) area += y * (plateau_hi + s);
        if (xm > s) area += arc_integral(s, xm, r);
        area += arc_integral(-r, xm, r); // lower half, down to -c(X)
        return area;
    }
    const Real s = std::sqrt(std::max(0.0, r * r - y * y));
    const Real hi = std::min(xm, s);
    if (hi <= -s) return 0.0;
    return y * (hi + s) + arc_integral(-s, hi, r);
}

// Area of the disk of radius r centered at the origin within [x0,x1]x[y0,y1].
Real circle_box_area(Real x0, Real x1, Real y0, Real y1, Real r) {
    if (r <= 0.0) return 0.0;
    return circle_quarter_area(x1, y1, r) - circle_quarter_area(x0, y1, r) -
           circle_quarter_area(x1, y0, r) + circle_quarter_area(x0, y0, r);
}

Real box_point_dist_sq(const Eigen::Array3d& lo, const Eigen::Array3d& hi,
                       const Eigen::Array3d& p, int dim) {
    Real d2 = 0.0;
    for (int a = 0; a < dim; ++a) {
        const Real d = std::max({lo[a] - p[a], p[a] - hi[a], 0.0});
        d2 += d * d;
    }
    return d2;
}

Real box_point_maxdist_sq(const Eigen::Array3d& lo, const Eigen::Array3d& hi,
                          const Eigen::Array3d& p, int dim) {
    Real d2 = 0.0;
    for (int a = 0; a < dim; ++a) {
        const Real d = std::max(std::abs(lo[a] - p[a]), std::abs(hi[a] - p[a]));
        d2 += d * d;
    }
    return d2;
}

// 16-point Gauss-Legendre on [-1, 1], stored as the positive half.
constexpr int kGL = 8;
constexpr Real kGLNode[kGL] = {
    0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
    0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
    0.9445750230732326, 0.9894009349916499};
constexpr Real kGLWeight[kGL] = {
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
    0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
    0.0622535239386479, 0.0271524594117541};

// Volume of the ball of radius r centered at the origin within the box,
// integrating the exact 2D slice area over z.
Real ball_box_volume(const Eigen::Array3d& lo, const Eigen::Array3d& hi, Real r) {
    const Real z0 = std::max(lo[2], -r);
    const Real z1 = std::min(hi[2], r);
    if (z1 <= z0 || r <= 0.0) return 0.0;
    const Real mid = 0.5 * (z0 + z1);
    const Real half = 0.5 * (z1 - z0);
    Real vol = 0.0;
    for (int q = 0; q < kGL; ++q) {
        for (int sgn = -1; sgn <= 1; sgn += 2) {
            const Real z = mid + sgn * kGLNode[q] * half;
            const Real rz = std::sqrt(std::max(0.0, r * r - z * z));
            vol += kGLWeight[q] * circle_box_area(lo[0], hi[0], lo[1], hi[1], rz);
        }
    }
    return vol * half;
}

// Coverage fraction of one ball over one cell, with fast in/out paths.
Real ball_coverage(const Ball& b, const GridSpec& spec, int i, int j, int k) {
    const Eigen::Array3d lo = spec.cell_lo(i, j, k);
    Eigen::Array3d hi = lo;
    for (int a = 0; a < spec.dim; ++a) hi[a] += spec.spacing;
    const Real r2 = b.radius * b.radius;
    if (box_point_dist_sq(lo, hi, b.center, spec.dim) >= r2) return 0.0;
    if (box_point_maxdist_sq(lo, hi, b.center, spec.dim) <= r2) return 1.0;
    if (spec.dim == 2) {
        const Real area = circle_box_area(lo[0] - b.center[0], hi[0] - b.center[0],
                                          lo[1] - b.center[1], hi[1] - b.center[1],
                                          b.radius);
        return std::clamp(area / (spec.spacing * spec.spacing), 0.0, 1.0);
    }
    Eigen::Array3d lo3 = lo - b.center;
    Eigen::Array3d hi3 = hi - b.center;
    const Real v = ball_box_volume(lo3, hi3, b.radius);
    return std::clamp(v / spec.cell_volume(), 0.0, 1.0);
}

// Cell index range [i0, i1) intersecting [lo, hi] along one axis.
void axis_cell_range(const GridSpec& spec, int axis, Real lo, Real hi,
                     int& c0, int& c1) {
    const Real o = spec.origin[axis];
    c0 = std::max(0, static_cast<int>(std::floor((lo - o) / spec.spacing)));
    c1 = std::min<int>(spec.cells[axis],
                       static_cast<int>(std::ceil((hi - o) / spec.spacing)) + 1);
    c1 = std::max(c0, c1);
}

struct CellRange {
    int i0, i1, j0, j1, k0, k1;
};

CellRange cell_range(const GridSpec& spec, const Eigen::Array3d& lo,
                     const Eigen::Array3d& hi) {
    CellRange r{0, 0, 0, 0, 0, 1};
    axis_cell_range(spec, 0, lo[0], hi[0], r.i0, r.i1);
    axis_cell_range(spec, 1, lo[1], hi[1], r.j0, r.j1);
    if (spec.dim == 3) axis_cell_range(spec, 2, lo[2], hi[2], r.k0, r.k1);
    return r;
}

void fill_ball(Eigen::ArrayXd& occ, const GridSpec& spec, const Ball& b,
               bool subtract_mode = false) {
    const Eigen::Array3d blo = b.center - b.radius;
    const Eigen::Array3d bhi = b.center + b.radius;
    const CellRange r = cell_range(spec, blo, bhi);
    for (int k = r.k0; k < r.k1; ++k)
        for (int j = r.j0; j < r.j1; ++j)
            for (int i = r.i0; i < r.i1; ++i) {
                const Real c = ball_coverage(b, spec, i, j, k);
                const auto idx = spec.index(i, j, k);
                occ[idx] = subtract_mode ? std::max(0.0, occ[idx] - c)
                                         : std::max(occ[idx], c);
            }
}

void fill_rectangle(Eigen::ArrayXd& occ, const GridSpec& spec, const Rectangle& rc) {
    const CellRange r = cell_range(spec, rc.lo, rc.hi);
    for (int k = r.k0; k < r.k1; ++k)
        for (int j = r.j0; j < r.j1; ++j)
            for (int i = r.i0; i < r.i1; ++i) {
                const Eigen::Array3d clo = spec.cell_lo(i, j, k);
                Real frac = 1.0;
                for (int a = 0; a < spec.dim; ++a) {
                    const Real ov = std::min(rc.hi[a], clo[a] + spec.spacing) -
                                    std::max(rc.lo[a], clo[a]);
                    frac *= std::clamp(ov / spec.spacing, 0.0, 1.0);
                }
                occ[spec.index(i, j, k)] = std::max(occ[spec.index(i, j, k)], frac);
            }
}

bool ovoid_inside(const Ovoid& ov, Real x, Real y) {
    const Real X = x - ov.center[0];
    const Real Y = y - ov.center[1];
    const Real q = X * X + Y * Y;
    return q * q <= ov.size * X * X * X;
}

void fill_ovoid(Eigen::ArrayXd& occ, const GridSpec& spec, const Ovoid& ov) {
    if (spec.dim != 2) throw ConfigError("rasterize: ovoid is 2D only");
    auto [blo, bhi] = shape_bounds(Shape{ov}, 2);
    const CellRange r = cell_range(spec, blo, bhi);
    const int s = 16;
    for (int j = r.j0; j < r.j1; ++j)
        for (int i = r.i0; i < r.i1; ++i) {
            const Eigen::Array3d clo = spec.cell_lo(i, j, 0);
            int hits = 0;
            for (int sy = 0; sy < s; ++sy)
                for (int sx = 0; sx < s; ++sx) {
                    const Real x = clo[0] + (sx + 0.5) / s * spec.spacing;
                    const Real y = clo[1] + (sy + 0.5) / s * spec.spacing;
                    if (ovoid_inside(ov, x, y)) ++hits;
                }
            occ[spec.index(i, j, 0)] = static_cast<Real>(hits) / (s * s);
        }
}

void fill_ball_union(Eigen::ArrayXd& occ, const GridSpec& spec, const BallUnion& u) {
    std::unordered_set<std::int64_t> multi;
    for (const Ball& b : u.balls) {
        const Eigen::Array3d blo = b.center - b.radius;
        const Eigen::Array3d bhi = b.center + b.radius;
        const CellRange r = cell_range(spec, blo, bhi);
        for (int k = r.k0; k < r.k1; ++k)
            for (int j = r.j0; j < r.j1; ++j)
                for (int i = r.i0; i < r.i1; ++i) {
                    const Real c = ball_coverage(b, spec, i, j, k);
                    if (c <= 0.0) continue;
                    const auto idx = spec.index(i, j, k);
                    if (occ[idx] > 0.0) {
                        multi.insert(idx);
                        occ[idx] = std::min(1.0, occ[idx] + c);
                    } else {
                        occ[idx] = c;
                    }
                }
    }
    if (multi.empty()) return;
    // Cells seen by several balls: midpoint supersampling of the union.
    const int s = spec.dim == 2 ? 16 : 8;
    const int nz = spec.dim == 3 ? s : 1;
    for (const auto idx : multi) {
        const int i = static_cast<int>(idx % spec.cells[0]);
        const int j = static_cast<int>((idx / spec.cells[0]) % spec.cells[1]);
        const int k = static_cast<int>(idx / (static_cast<std::int64_t>(spec.cells[0]) * spec.cells[1]));
        const Eigen::Array3d clo = spec.cell_lo(i, j, k);
        long hits = 0;
        for (int sz = 0; sz < nz; ++sz)
            for (int sy = 0; sy < s; ++sy)
                for (int sx = 0; sx < s; ++sx) {
                    Eigen::Array3d p = clo;
                    p[0] += (sx + 0.5) / s * spec.spacing;
                    p[1] += (sy + 0.5) / s * spec.spacing;
                    if (spec.dim == 3) p[2] += (sz + 0.5) / s * spec.spacing;
                    for (const Ball& b : u.balls) {
                        Real d2 = 0.0;
                        for (int a = 0; a < spec.dim; ++a) {
                            const Real d = p[a] - b.center[a];
                            d2 += d * d;
                        }
                        if (d2 <= b.radius * b.radius) {
                            ++hits;
                            break;
                        }
                    }
                }
        occ[idx] = static_cast<Real>(hits) / (static_cast<Real>(s) * s * nz);
    }
}

Real ovoid_perimeter(Real size) {
    // arc length of r(θ) = size cos^3 θ: size ∫ cos^2 θ sqrt(1 + 8 sin^2 θ) dθ
    const int n = 512;
    Real sum = 0.0;
    const Real a = -kPi / 2, b = kPi / 2;
    const Real dt = (b - a) / n;
    for (int m = 0; m <= n; ++m) {
        const Real t = a + m * dt;
        const Real c = std::cos(t);
        const Real f = c * c * std::sqrt(1.0 + 8.0 * std::sin(t) * std::sin(t));
        const Real w = (m == 0 || m == n) ? 1.0 : (m % 2 ? 4.0 : 2.0);
        sum += w * f;
    }
    return size * sum * dt / 3.0;
}

Analytic make_tag(const Shape& s, int dim) {
    Analytic a;
    if (std::holds_alternative<EmptyShape>(s)) {
        a.kind = Analytic::Kind::Empty;
        a.volume = 0.0;
        a.perimeter = 0.0;
        return a;
    }
    if (const Ball* b = std::get_if<Ball>(&s)) {
        a.kind = Analytic::Kind::Ball;
        a.center = b->center;
        a.radius = b->radius;
        a.volume = oracles::unit_ball_volume(dim) * std::pow(b->radius, dim);
        a.perimeter = oracles::unit_sphere_surface(dim) * std::pow(b->radius, dim - 1);
        return a;
    }
    if (const Annulus* an = std::get_if<Annulus>(&s)) {
        a.kind = Analytic::Kind::Annulus;
        a.center = an->center;
        a.radius = an->outer;
        a.inner = an->inner;
        a.volume = oracles::unit_ball_volume(dim) *
                   (std::pow(an->outer, dim) - std::pow(an->inner, dim));
        a.perimeter = oracles::unit_sphere_surface(dim) *
                      (std::pow(an->outer, dim - 1) + std::pow(an->inner, dim - 1));
        return a;
    }
    if (const Rectangle* rc = std::get_if<Rectangle>(&s)) {
        a.kind = Analytic::Kind::Rectangle;
        a.lo = rc->lo;
        a.hi = rc->hi;
        Real vol = 1.0, per = 0.0;
        for (int ax = 0; ax < dim; ++ax) vol *= rc->hi[ax] - rc->lo[ax];
        if (dim == 2) {
            per = 2.0 * ((rc->hi[0] - rc->lo[0]) + (rc->hi[1] - rc->lo[1]));
        } else {
            const Real dx = rc->hi[0] - rc->lo[0];
            const Real dy = rc->hi[1] - rc->lo[1];
            const Real dz = rc->hi[2] - rc->lo[2];
            per = 2.0 * (dx * dy + dy * dz + dz * dx);
        }
        a.volume = vol;
        a.perimeter = per;
        return a;
    }
    if (const Ovoid* ov = std::get_if<Ovoid>(&s)) {
        a.kind = Analytic::Kind::Ovoid;
        a.center = ov->center;
        a.radius = ov->size;
        a.volume = 5.0 * kPi / 32.0 * ov->size * ov->size;
        a.perimeter = ovoid_perimeter(ov->size);
        return a;
    }
    return Analytic::generic();
}

} // namespace

std::string to_string(Analytic::Kind k) {
    switch (k) {
        case Analytic::Kind::Generic: return "generic";
        case Analytic::Kind::Empty: return "empty";
        case Analytic::Kind::Ball: return "ball";
        case Analytic::Kind::Annulus: return "annulus";
        case Analytic::Kind::Rectangle: return "rectangle";
        case Analytic::Kind::Ovoid: return "ovoid";
    }
    return "?";
}

std::pair<Eigen::Array3d, Eigen::Array3d> shape_bounds(const Shape& s, int dim) {
    Eigen::Array3d lo = Eigen::Array3d::Zero();
    Eigen::Array3d hi = Eigen::Array3d::Zero();
    if (const Ball* b = std::get_if<Ball>(&s)) {
        lo = b->center - b->radius;
        hi = b->center + b->radius;
    } else if (const Annulus* an = std::get_if<Annulus>(&s)) {
        lo = an->center - an->outer;
        hi = an->center + an->outer;
    } else if (const Rectangle* rc = std::get_if<Rectangle>(&s)) {
        lo = rc->lo;
        hi = rc->hi;
    } else if (const Ovoid* ov = std::get_if<Ovoid>(&s)) {
        // extent of r = a cos^3 θ: x in [0, a], |y| <= a 3sqrt(3)/16
        const Real yb = ov->size * 3.0 * std::sqrt(3.0) / 16.0;
        lo = ov->center + Eigen::Array3d(0.0, -yb, 0.0);
        hi = ov->center + Eigen::Array3d(ov->size, yb, 0.0);
    } else if (const BallUnion* u = std::get_if<BallUnion>(&s)) {
        if (u->balls.empty()) return {lo, hi};
        lo = u->balls[0].center - u->balls[0].radius;
        hi = u->balls[0].center + u->balls[0].radius;
        for (const Ball& b : u->balls) {
            lo = lo.min(b.center - b.radius);
            hi = hi.max(b.center + b.radius);
        }
    }
    if (dim == 2) lo[2] = hi[2] = 0.0;
    return {lo, hi};
}

std::optional<Real> shape_volume(const Shape& s, int dim) {
    return make_tag(s, dim).volume;
}

std::optional<Real> shape_perimeter(const Shape& s, int dim) {
    return make_tag(s, dim).perimeter;
}

Real ball_cell_coverage(const Ball& b, const GridSpec& spec, int i, int j, int k) {
    return ball_coverage(b, spec, i, j, k);
}

GridDomain rasterize(const Shape& shape, const GridSpec& spec) {
    spec.validate();
    GridDomain d;
    d.spec = spec;
    d.occupancy = Eigen::ArrayXd::Zero(spec.cell_count());
    d.analytic = make_tag(shape, spec.dim);

    const bool empty = std::holds_alternative<EmptyShape>(shape) ||
                       (std::holds_alternative<BallUnion>(shape) &&
                        std::get<BallUnion>(shape).balls.empty());
    if (empty) {
        d.analytic.kind = Analytic::Kind::Empty;
        d.analytic.volume = 0.0;
        d.analytic.perimeter = 0.0;
        return d;
    }

    const auto [blo, bhi] = shape_bounds(shape, spec.dim);
    const Real margin = 4.0 * spec.spacing;
    for (int a = 0; a < spec.dim; ++a) {
        if (blo[a] < spec.box_lo()[a] + margin || bhi[a] > spec.box_hi()[a] - margin)
            throw BoundsError("rasterize: shape must keep a margin of 4h from the grid frame");
    }

    std::visit(
        [&](const auto& sh) {
            using T = std::decay_t<decltype(sh)>;
            if constexpr (std::is_same_v<T, Ball>) {
                fill_ball(d.occupancy, spec, sh);
            } else if constexpr (std::is_same_v<T, Annulus>) {
                fill_ball(d.occupancy, spec, Ball{sh.center, sh.outer});
                fill_ball(d.occupancy, spec, Ball{sh.center, sh.inner}, true);
            } else if constexpr (std::is_same_v<T, Rectangle>) {
                fill_rectangle(d.occupancy, spec, sh);
            } else if constexpr (std::is_same_v<T, Ovoid>) {
                fill_ovoid(d.occupancy, spec, sh);
            } else if constexpr (std::is_same_v<T, BallUnion>) {
                fill_ball_union(d.occupancy, spec, sh);
            }
        },
        shape);
    return d;
}

GridDomain subtract(const GridDomain& domain, const CompactSet& holes) {
    if (!domain.spec.same_as(holes.spec))
        throw SpecMismatchError("subtract: grids differ");
    GridDomain out;
    out.spec = domain.spec;
    out.occupancy = (domain.occupancy - holes.occupancy).max(0.0);

    const bool holes_empty = holes.occupancy.maxCoeff() <= 0.0;
    if (holes_empty) {
        out.analytic = domain.analytic;
        return out;
    }
    const bool concentric_balls =
        domain.analytic.kind == Analytic::Kind::Ball &&
        holes.analytic.kind == Analytic::Kind::Ball &&
        holes.analytic.radius < domain.analytic.radius &&
        ((domain.analytic.center - holes.analytic.center).abs() <
         1e-12 * domain.spec.spacing)
            .all();
    if (concentric_balls) {
        out.analytic = make_tag(
            Shape{Annulus{domain.analytic.center, domain.analytic.radius,
                          holes.analytic.radius}},
            domain.spec.dim);
    } else {
        out.analytic = Analytic::generic();
    }
    return out;
}

CompactSet symmetric_difference_hull(const GridDomain& a, const GridDomain& b) {
    if (!a.spec.same_as(b.spec))
        throw SpecMismatchError("symmetric_difference_hull: grids differ");
    const GridSpec& spec = a.spec;
    Eigen::ArrayXd diff = (a.occupancy - b.occupancy).abs();

    // One grey-scale dilation step of radius h: max over the axis cross.
    CompactSet out;
    out.spec = spec;
    out.occupancy = diff;
    const int nx = spec.cells[0], ny = spec.cells[1], nz = spec.cells[2];
    const std::int64_t sx = 1, sy = nx, sz = static_cast<std::int64_t>(nx) * ny;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const auto idx = spec.index(i, j, k);
                Real m = diff[idx];
                if (i > 0) m = std::max(m, diff[idx - sx]);
                if (i + 1 < nx) m = std::max(m, diff[idx + sx]);
                if (j > 0) m = std::max(m, diff[idx - sy]);
                if (j + 1 < ny) m = std::max(m, diff[idx + sy]);
                if (spec.dim == 3) {
                    if (k > 0) m = std::max(m, diff[idx - sz]);
                    if (k + 1 < nz) m = std::max(m, diff[idx + sz]);
                }
                out.occupancy[idx] = m;
            }
    out.analytic = Analytic::generic();
    return out;
}

Measure measure(const GridDomain& domain) {
    Measure m;
    m.volume = domain.occupancy.sum() * domain.spec.cell_volume();
    m.perimeter = total_variation(domain.spec, domain.occupancy);
    return m;
}

GridDomain smooth(const GridDomain& domain, int passes) {
    GridDomain out = domain;
    const GridSpec& spec = domain.spec;
    const int nx = spec.cells[0], ny = spec.cells[1], nz = spec.cells[2];
    Eigen::ArrayXd tmp(out.occupancy.size());
    for (int pass = 0; pass < passes; ++pass) {
        for (int axis = 0; axis < spec.dim; ++axis) {
            const std::int64_t stride =
                axis == 0 ? 1 : (axis == 1 ? nx : static_cast<std::int64_t>(nx) * ny);
            const int n = spec.cells[axis];
            for (int k = 0; k < nz; ++k)
                for (int j = 0; j < ny; ++j)
                    for (int i = 0; i < nx; ++i) {
                        const auto idx = spec.index(i, j, k);
                        const int c = axis == 0 ? i : (axis == 1 ? j : k);
                        Real s = out.occupancy[idx];
                        s += c > 0 ? out.occupancy[idx - stride] : 0.0;
                        s += c + 1 < n ? out.occupancy[idx + stride] : 0.0;
                        tmp[idx] = s / 3.0;
                    }
            out.occupancy.swap(tmp);
        }
    }
    out.analytic = Analytic::generic();
    return out;
}

CellBox CellBox::expanded(int cells, const GridSpec& spec) const {
    CellBox b = *this;
    for (int a = 0; a < spec.dim; ++a) {
        b.lo[a] = std::max(0, lo[a] - cells);
        b.hi[a] = std::min<int>(spec.cells[a], hi[a] + cells);
    }
    return b;
}

CellBox support_box(const GridSpec& spec, const Eigen::ArrayXd& values,
                    Real threshold) {
    CellBox box;
    box.lo = spec.cells;
    box.hi = Eigen::Array3i::Zero();
    const int nx = spec.cells[0], ny = spec.cells[1], nz = spec.cells[2];
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                if (values[spec.index(i, j, k)] > threshold) {
                    box.lo[0] = std::min(box.lo[0], i);
                    box.lo[1] = std::min(box.lo[1], j);
                    box.lo[2] = std::min(box.lo[2], k);
                    box.hi[0] = std::max(box.hi[0], i + 1);
                    box.hi[1] = std::max(box.hi[1], j + 1);
                    box.hi[2] = std::max(box.hi[2], k + 1);
                }
    if ((box.hi <= box.lo).any()) {
        box.lo.setZero();
        box.hi.setZero();
    }
    if (spec.dim == 2) {
        box.lo[2] = 0;
        box.hi[2] = box.hi[2] > 0 ? 1 : box.hi[2];
    }
    return box;
}

} // namespace cheeger
