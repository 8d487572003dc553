#include "pd_kernel.hpp"

#include <cmath>

#include "cheeger/tv.hpp"

namespace cheeger::detail {

void PdState::reset(const GridSpec& spec) {
    const auto n = spec.cell_count();
    u = Eigen::ArrayXd::Zero(n);
    for (int a = 0; a < spec.dim; ++a) {
        p[a] = Eigen::ArrayXd::Zero(n);
        q[a] = Eigen::ArrayXd::Zero(n);
    }
    valid = true;
}

namespace {

constexpr Real kFw = 1.0 - kNodeWeight; // forward-difference weight
constexpr Real kNw = kNodeWeight;       // node-averaged weight

struct GapValues {
    Real tv = 0.0;   // blended jump sum, needs * h^{n-1}
    Real mass = 0.0; // raw Σ v, needs * h^n
    Real dual = 0.0; // raw Σ min(lo c, hi c) with c physical, needs * h^n
};

// Primal and dual objective pieces over the work box. The forward gradient
// of box-supported u lives on the box expanded one cell down; node gradients
// live on nodes [lo-1, hi).
GapValues evaluate_gap(const PdProblem& prob, const PdState& s) {
    const GridSpec& spec = *prob.spec;
    const int nx = spec.cells[0];
    const int ny = spec.cells[1];
    const Real inv_h = 1.0 / spec.spacing;
    const std::int64_t sy = nx, sz = static_cast<std::int64_t>(nx) * ny;
    const CellBox& b = prob.box;
    const bool is3d = spec.dim == 3;
    const int px0 = b.lo[0] - 1, py0 = b.lo[1] - 1;
    const int pz0 = is3d ? b.lo[2] - 1 : 0;
    const int pz1 = is3d ? b.hi[2] : 1;

    const Real* u = s.u.data();
    const Real* lo = prob.lo ? prob.lo->data() : nullptr;
    const Real* hi = prob.hi->data();

    GapValues g;
    // Blended tv of u.
    for (int k = pz0; k < pz1; ++k)
        for (int j = py0; j < b.hi[1]; ++j) {
            const std::int64_t row = spec.index(0, j, k);
            for (int i = px0; i < b.hi[0]; ++i) {
                const std::int64_t idx = row + i;
                const Real c = u[idx];
                const Real dx = u[idx + 1] - c;
                const Real dy = u[idx + sy] - c;
                Real fw2 = dx * dx + dy * dy;
                Real nx2;
                if (!is3d) {
                    const Real u11 = u[idx + sy + 1];
                    const Real gx = 0.5 * (dx + (u11 - u[idx + sy]));
                    const Real gy = 0.5 * (dy + (u11 - u[idx + 1]));
                    nx2 = gx * gx + gy * gy;
                } else {
                    const Real dz = u[idx + sz] - c;
                    fw2 += dz * dz;
                    Real gx = 0, gy = 0, gz = 0;
                    for (int db = 0; db <= 1; ++db)
                        for (int dc = 0; dc <= 1; ++dc) {
                            gx += u[idx + 1 + db * sy + dc * sz] - u[idx + db * sy + dc * sz];
                            gy += u[idx + db + sy + dc * sz] - u[idx + db + dc * sz];
                            gz += u[idx + db + dc * sy + sz] - u[idx + db + dc * sy];
                        }
                    gx *= 0.25;
                    gy *= 0.25;
                    gz *= 0.25;
                    nx2 = gx * gx + gy * gy + gz * gz;
                }
                g.tv += kFw * std::sqrt(fw2) + kNw * std::sqrt(nx2);
            }
        }
    // Mass and the dual function.
    const Real* pfx = s.p[0].data();
    const Real* pfy = s.p[1].data();
    const Real* pfz = is3d ? s.p[2].data() : nullptr;
    const Real* qnx = s.q[0].data();
    const Real* qny = s.q[1].data();
    const Real* qnz = is3d ? s.q[2].data() : nullptr;
    for (int k = (is3d ? b.lo[2] : 0); k < pz1; ++k)
        for (int j = b.lo[1]; j < b.hi[1]; ++j) {
            const std::int64_t row = spec.index(0, j, k);
            for (int i = b.lo[0]; i < b.hi[0]; ++i) {
                const std::int64_t idx = row + i;
                g.mass += u[idx];
                Real divf = pfx[idx] - pfx[idx - 1] + pfy[idx] - pfy[idx - sy];
                Real divn;
                if (!is3d) {
                    divn = 0.5 * (qnx[idx] - qnx[idx - 1] + qnx[idx - sy] - qnx[idx - 1 - sy] +
                                  qny[idx] + qny[idx - 1] - qny[idx - sy] - qny[idx - 1 - sy]);
                } else {
                    divf += pfz[idx] - pfz[idx - sz];
                    Real sx = 0, sy_ = 0, szz = 0;
                    for (int db = -1; db <= 0; ++db)
                        for (int dc = -1; dc <= 0; ++dc) {
                            sx += qnx[idx + db * sy + dc * sz] - qnx[idx - 1 + db * sy + dc * sz];
                            sy_ += qny[idx + db + dc * sz] - qny[idx + db - sy + dc * sz];
                            szz += qnz[idx + db + dc * sy] - qnz[idx + db + dc * sy - sz];
                        }
                    divn = 0.25 * (sx + sy_ + szz);
                }
                const Real div_total = (kFw * divf + kNw * divn) * inv_h;
                const Real cc = -div_total - prob.linear;
                const Real l = lo ? lo[idx] : 0.0;
                g.dual += std::min(l * cc, hi[idx] * cc);
            }
        }
    return g;
}

} // namespace

PdOutcome run_pd(const PdProblem& prob, PdState& state, const PdOptions& opts) {
    const GridSpec& spec = *prob.spec;
    const int nx = spec.cells[0], ny = spec.cells[1], nz = spec.cells[2];
    const Real h = spec.spacing;
    const Real inv_h = 1.0 / h;
    const Real step = 0.999 * h / (2.0 * std::sqrt(static_cast<Real>(spec.dim)));
    const Real tau = step / opts.step_ratio;
    const Real sigma = step * opts.step_ratio;
    const std::int64_t sy = nx, sz = static_cast<std::int64_t>(nx) * ny;
    const bool is3d = spec.dim == 3;

    PdOutcome out;
    if (prob.box.empty()) {
        out.converged = true;
        return out;
    }
    // The stencils reach one cell around the box; callers keep a margin.
    for (int a = 0; a < spec.dim; ++a)
        if (prob.box.lo[a] < 1 || prob.box.hi[a] > spec.cells[a] - 1)
            throw LabError("run_pd: work box must keep one cell of grid margin");

    if (!state.valid) state.reset(spec);

    // Warm-start hygiene: clamp into [lo, hi] inside the box, zero elsewhere.
    {
        const Real* plo = prob.lo ? prob.lo->data() : nullptr;
        const Real* phi = prob.hi->data();
        Real* pu = state.u.data();
        for (int k = 0; k < nz; ++k)
            for (int j = 0; j < ny; ++j) {
                const std::int64_t row = spec.index(0, j, k);
                const bool in_jk = j >= prob.box.lo[1] && j < prob.box.hi[1] &&
                                   (!is3d || (k >= prob.box.lo[2] && k < prob.box.hi[2]));
                for (int i = 0; i < nx; ++i) {
                    const std::int64_t idx = row + i;
                    if (in_jk && i >= prob.box.lo[0] && i < prob.box.hi[0]) {
                        const Real l = plo ? plo[idx] : 0.0;
                        const Real v = pu[idx];
                        pu[idx] = v < l ? l : (v > phi[idx] ? phi[idx] : v);
                    } else {
                        pu[idx] = 0.0;
                    }
                }
            }
    }

    Eigen::ArrayXd ubar = state.u;

    const CellBox& b = prob.box;
    const int px0 = b.lo[0] - 1, py0 = b.lo[1] - 1;
    const int pz0 = is3d ? b.lo[2] - 1 : 0;
    const int pz1 = is3d ? b.hi[2] : 1;
    const int uz0 = is3d ? b.lo[2] : 0;

    Real* u = state.u.data();
    Real* ub = ubar.data();
    Real* pfx = state.p[0].data();
    Real* pfy = state.p[1].data();
    Real* pfz = is3d ? state.p[2].data() : nullptr;
    Real* qnx = state.q[0].data();
    Real* qny = state.q[1].data();
    Real* qnz = is3d ? state.q[2].data() : nullptr;
    const Real* lo = prob.lo ? prob.lo->data() : nullptr;
    const Real* hi = prob.hi->data();
    const Real lin = prob.linear;

    const Real sf = sigma * kFw * inv_h;        // forward dual step
    const Real sn2 = sigma * kNw * inv_h * 0.5; // node dual step (2D averaging)
    const Real sn3 = sigma * kNw * inv_h * 0.25;
    const Real cf = tau * kFw * inv_h;          // forward divergence weight
    const Real cn2 = tau * kNw * inv_h * 0.5;
    const Real cn3 = tau * kNw * inv_h * 0.25;

    for (long iter = 1; iter <= opts.max_iters; ++iter) {
        // Forward dual ascent + projection, and node dual in the same sweep.
        for (int k = pz0; k < pz1; ++k)
            for (int j = py0; j < b.hi[1]; ++j) {
                const std::int64_t row = spec.index(0, j, k);
                for (int i = px0; i < b.hi[0]; ++i) {
                    const std::int64_t idx = row + i;
                    const Real c = ub[idx];
                    const Real dx = ub[idx + 1] - c;
                    const Real dy = ub[idx + sy] - c;
                    if (!is3d) {
                        Real vx = pfx[idx] + sf * dx;
                        Real vy = pfy[idx] + sf * dy;
                        Real n2 = vx * vx + vy * vy;
                        if (n2 > 1.0) {
                            const Real inv = 1.0 / std::sqrt(n2);
                            vx *= inv;
                            vy *= inv;
                        }
                        pfx[idx] = vx;
                        pfy[idx] = vy;

                        const Real u11 = ub[idx + sy + 1];
                        Real wx = qnx[idx] + sn2 * (dx + (u11 - ub[idx + sy]));
                        Real wy = qny[idx] + sn2 * (dy + (u11 - ub[idx + 1]));
                        n2 = wx * wx + wy * wy;
                        if (n2 > 1.0) {
                            const Real inv = 1.0 / std::sqrt(n2);
                            wx *= inv;
                            wy *= inv;
                        }
                        qnx[idx] = wx;
                        qny[idx] = wy;
                    } else {
                        const Real dz = ub[idx + sz] - c;
                        Real vx = pfx[idx] + sf * dx;
                        Real vy = pfy[idx] + sf * dy;
                        Real vz = pfz[idx] + sf * dz;
                        Real n2 = vx * vx + vy * vy + vz * vz;
                        if (n2 > 1.0) {
                            const Real inv = 1.0 / std::sqrt(n2);
                            vx *= inv;
                            vy *= inv;
                            vz *= inv;
                        }
                        pfx[idx] = vx;
                        pfy[idx] = vy;
                        pfz[idx] = vz;

                        Real gx = 0, gy = 0, gz = 0;
                        for (int db = 0; db <= 1; ++db)
                            for (int dc = 0; dc <= 1; ++dc) {
                                gx += ub[idx + 1 + db * sy + dc * sz] - ub[idx + db * sy + dc * sz];
                                gy += ub[idx + db + sy + dc * sz] - ub[idx + db + dc * sz];
                                gz += ub[idx + db + dc * sy + sz] - ub[idx + db + dc * sy];
                            }
                        Real wx = qnx[idx] + sn3 * gx;
                        Real wy = qny[idx] + sn3 * gy;
                        Real wz = qnz[idx] + sn3 * gz;
                        n2 = wx * wx + wy * wy + wz * wz;
                        if (n2 > 1.0) {
                            const Real inv = 1.0 / std::sqrt(n2);
                            wx *= inv;
                            wy *= inv;
                            wz *= inv;
                        }
                        qnx[idx] = wx;
                        qny[idx] = wy;
                        qnz[idx] = wz;
                    }
                }
            }

        // Primal descent with the composite divergence, then theta = 1
        // extrapolation.
        for (int k = uz0; k < pz1; ++k)
            for (int j = b.lo[1]; j < b.hi[1]; ++j) {
                const std::int64_t row = spec.index(0, j, k);
                for (int i = b.lo[0]; i < b.hi[0]; ++i) {
                    const std::int64_t idx = row + i;
                    Real divf = pfx[idx] - pfx[idx - 1] + pfy[idx] - pfy[idx - sy];
                    Real divn;
                    if (!is3d) {
                        divn = qnx[idx] - qnx[idx - 1] + qnx[idx - sy] - qnx[idx - 1 - sy] +
                               qny[idx] + qny[idx - 1] - qny[idx - sy] - qny[idx - 1 - sy];
                    } else {
                        divf += pfz[idx] - pfz[idx - sz];
                        divn = 0;
                        for (int db = -1; db <= 0; ++db)
                            for (int dc = -1; dc <= 0; ++dc) {
                                divn += qnx[idx + db * sy + dc * sz] -
                                        qnx[idx - 1 + db * sy + dc * sz];
                                divn += qny[idx + db + dc * sz] -
                                        qny[idx + db - sy + dc * sz];
                                divn += qnz[idx + db + dc * sy] -
                                        qnz[idx + db + dc * sy - sz];
                            }
                    }
                    Real v = u[idx] + cf * divf + (is3d ? cn3 : cn2) * divn + tau * lin;
                    const Real l = lo ? lo[idx] : 0.0;
                    v = v < l ? l : (v > hi[idx] ? hi[idx] : v);
                    ub[idx] = 2.0 * v - u[idx];
                    u[idx] = v;
                }
            }

        if (iter % opts.check_every == 0 || iter == opts.max_iters) {
            const GapValues g = evaluate_gap(prob, state);
            const Real tv_prev = out.tv_value;
            const Real mass_prev = out.mass;
            out.tv_value = g.tv * spec.face_area();
            out.mass = g.mass * spec.cell_volume();
            out.primal = out.tv_value - lin * out.mass;
            out.dual = g.dual * spec.cell_volume();
            out.gap = out.primal - out.dual;
            const long prev_iter = out.iterations;
            out.iterations = iter;
            if (out.gap <= opts.tol_gap_abs) {
                out.converged = true;
                return out;
            }
            // Stall-based secondary stop: the certified gap has an O(1/k)
            // tail, while the primal pair (tv, mass) settles much earlier.
            if (opts.stall_tol > 0 && prev_iter > 0) {
                const Real drift =
                    std::abs(out.tv_value - tv_prev) + std::abs(lin * (out.mass - mass_prev));
                const Real scale = std::max({std::abs(out.tv_value), lin * out.mass, 1e-30});
                if (drift <= opts.stall_tol * scale * (iter - prev_iter) / 100.0) {
                    if (++out.stalled_checks >= opts.stall_checks) {
                        out.converged = true;
                        out.stalled = true;
                        return out;
                    }
                } else {
                    out.stalled_checks = 0;
                }
            }
        }
    }
    return out;
}

} // namespace cheeger::detail
