#include "heston/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseLU>

namespace heston {

void PdeConfig::validate() const {
    if (!(penalty_epsilon_rel > 0.0)) throw std::invalid_argument("penalty_epsilon_rel must be > 0");
    if (!(newton_tol_rel > 0.0)) throw std::invalid_argument("newton_tol_rel must be > 0");
    if (max_newton_iterations < 1) throw std::invalid_argument("max_newton_iterations must be >= 1");
    if (rannacher_steps < 0) throw std::invalid_argument("rannacher_steps must be >= 0");
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using Vec = Eigen::VectorXd;

struct RowStencil {
    // Local weights indexed by (dj+1, dk+1).
    double w[3][3] = {};
    void add(int dj, int dk, double v) { w[dj + 1][dk + 1] += v; }
};

}  // namespace

AssembledOperator assemble_operator(const Lattice& lat, const HestonParams& p, double /*t*/) {
    p.validate();
    const int nx = lat.nx(), ny = lat.ny();
    const double dx = lat.dx();
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(nx) * ny * 9);

    AssembledOperator out;
    out.worst_offdiagonal = 0.0;

    for (int j = 0; j < nx; ++j) {
        for (int k = 0; k < ny; ++k) {
            const double y = lat.y[k];
            const GeneratorCoeffs g = generator_coeffs(lat.x[j], y, p);
            const bool x_edge = (j == 0 || j == nx - 1);
            const bool y_bottom = (k == 0);
            const bool y_top = (k == ny - 1);
            const double dyp = y_top ? 0.0 : lat.y[k + 1] - lat.y[k];
            const double dym = y_bottom ? 0.0 : lat.y[k] - lat.y[k - 1];

            RowStencil st;

            if (!x_edge) {
                const double axx = g.a_xx / (dx * dx);
                st.add(-1, 0, axx);
                st.add(0, 0, -2.0 * axx);
                st.add(+1, 0, axx);

                // Mixed derivative: average of the two one-sided products
                // whose corners carry a positive weight for this sign.
                if (!y_bottom && !y_top) {
                    const double c2 = 2.0 * g.a_xy;  // coefficient of u_xy
                    if (c2 > 0.0) {
                        const double ap = c2 / (2.0 * dx * dyp);
                        const double am = c2 / (2.0 * dx * dym);
                        st.add(+1, +1, ap);
                        st.add(+1, 0, -ap);
                        st.add(0, +1, -ap);
                        st.add(0, 0, ap + am);
                        st.add(-1, 0, -am);
                        st.add(0, -1, -am);
                        st.add(-1, -1, am);
                    } else if (c2 < 0.0) {
                        const double bp = -c2 / (2.0 * dx * dyp);
                        const double bm = -c2 / (2.0 * dx * dym);
                        st.add(+1, -1, bm);
                        st.add(+1, 0, -bm);
                        st.add(0, -1, -bm);
                        st.add(0, 0, bp + bm);
                        st.add(-1, +1, bp);
                        st.add(-1, 0, -bp);
                        st.add(0, +1, -bp);
                    }
                }
            }

            // Second-order y on interior rows only: the bottom row is
            // degenerate (a_yy ~ y -> 0) and the top row imposes u_yy = 0.
            if (!y_bottom && !y_top) {
                const double denom = dym * dyp * (dym + dyp);
                st.add(0, -1, 2.0 * g.a_yy * dyp / denom);
                st.add(0, 0, -2.0 * g.a_yy / (dym * dyp));
                st.add(0, +1, 2.0 * g.a_yy * dym / denom);
            }

            // First-order x: central while both neighbour weights stay
            // nonnegative, else upwind.  Edge rows only have one side.
            if (x_edge) {
                if (j == 0) {
                    st.add(+1, 0, g.b_x / dx);
                    st.add(0, 0, -g.b_x / dx);
                } else {
                    st.add(-1, 0, -g.b_x / dx);
                    st.add(0, 0, g.b_x / dx);
                }
            } else {
                const double half = g.b_x / (2.0 * dx);
                if (st.w[2][1] + half >= 0.0 && st.w[0][1] - half >= 0.0) {
                    st.add(+1, 0, half);
                    st.add(-1, 0, -half);
                } else if (g.b_x >= 0.0) {
                    st.add(+1, 0, g.b_x / dx);
                    st.add(0, 0, -g.b_x / dx);
                } else {
                    st.add(-1, 0, -g.b_x / dx);
                    st.add(0, 0, g.b_x / dx);
                }
            }

            // First-order y.
            if (y_bottom) {
                // kappa theta > 0 transports information upward; the forward
                // difference is the upwind choice on the degenerate row.
                st.add(0, +1, g.b_y / dyp);
                st.add(0, 0, -g.b_y / dyp);
            } else if (y_top) {
                // Mean reversion points inward at y_max whenever y_max > theta.
                st.add(0, -1, -g.b_y / dym);
                st.add(0, 0, g.b_y / dym);
            } else {
                const double cp = g.b_y * dym / (dyp * (dym + dyp));
                const double cm = -g.b_y * dyp / (dym * (dym + dyp));
                const double c0 = -(cp + cm);
                if (st.w[1][2] + cp >= 0.0 && st.w[1][0] + cm >= 0.0) {
                    st.add(0, +1, cp);
                    st.add(0, -1, cm);
                    st.add(0, 0, c0);
                } else if (g.b_y >= 0.0) {
                    st.add(0, +1, g.b_y / dyp);
                    st.add(0, 0, -g.b_y / dyp);
                } else {
                    st.add(0, -1, -g.b_y / dym);
                    st.add(0, 0, g.b_y / dym);
                }
            }

            st.add(0, 0, g.c);

            const int row = static_cast<int>(lat.node(j, k));
            for (int dj = -1; dj <= 1; ++dj) {
                for (int dk = -1; dk <= 1; ++dk) {
                    const double w = st.w[dj + 1][dk + 1];
                    if (w == 0.0) continue;
                    const int jj = j + dj, kk = k + dk;
                    if (jj < 0 || jj >= nx || kk < 0 || kk >= ny)
                        throw std::logic_error("stencil reached outside the lattice");
                    if (!(dj == 0 && dk == 0))
                        out.worst_offdiagonal = std::min(out.worst_offdiagonal, w);
                    trip.emplace_back(row, static_cast<int>(lat.node(jj, kk)), w);
                }
            }
        }
    }

    out.matrix.resize(nx * ny, nx * ny);
    out.matrix.setFromTriplets(trip.begin(), trip.end());
    out.matrix.makeCompressed();
    out.m_matrix_ok = out.worst_offdiagonal >= -1e-12 / (dx * dx);
    return out;
}

std::vector<double> terminal_condition(const Lattice& lat, const PutSpec& spec) {
    std::vector<double> psi(static_cast<std::size_t>(lat.nx()) * lat.ny());
    for (int j = 0; j < lat.nx(); ++j) {
        const double pay = payoff_put(spec.strike, lat.spot(j));
        for (int k = 0; k < lat.ny(); ++k) psi[lat.node(j, k)] = pay;
    }
    return psi;
}

double x_min_boundary_value(const HestonParams& p, const PutSpec& spec, double x_min,
                            double tau, SurfaceKind kind) {
    const double asym =
        spec.strike * std::exp(-p.r * tau) - std::exp(x_min) * std::exp(-p.delta * tau);
    double v = std::max(asym, 0.0);
    if (kind == SurfaceKind::American) v = std::max(v, spec.strike - std::exp(x_min));
    return v;
}

namespace {

double inf_norm(const Vec& v) { return v.lpNorm<Eigen::Infinity>(); }

// Right-preconditioned BiCGSTAB for J x = b where the preconditioner is an
// exact factorization of the penalty-free system matrix.  Returns false on
// breakdown or stagnation; the caller then falls back to a direct solve.
bool bicgstab(const SpMat& J, const Eigen::SparseLU<SpMat>& M, const Vec& b, Vec& x,
              double tol, int max_iter) {
    const int n = static_cast<int>(b.size());
    x = Vec::Zero(n);
    Vec r = b;
    if (inf_norm(r) <= tol) return true;
    Vec rhat = r;
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    Vec v = Vec::Zero(n), pvec = Vec::Zero(n);
    for (int it = 0; it < max_iter; ++it) {
        double rho1 = rhat.dot(r);
        if (rho1 == 0.0 || !std::isfinite(rho1)) return false;
        if (it == 0) {
            pvec = r;
        } else {
            if (omega == 0.0) return false;
            double beta = (rho1 / rho) * (alpha / omega);
            pvec = r + beta * (pvec - omega * v);
        }
        Vec phat = M.solve(pvec);
        v = J * phat;
        double rv = rhat.dot(v);
        if (rv == 0.0 || !std::isfinite(rv)) return false;
        alpha = rho1 / rv;
        Vec s = r - alpha * v;
        x += alpha * phat;
        if (inf_norm(s) <= tol) return true;
        Vec shat = M.solve(s);
        Vec t = J * shat;
        double tt = t.dot(t);
        if (tt == 0.0 || !std::isfinite(tt)) return false;
        omega = t.dot(s) / tt;
        x += omega * shat;
        r = s - omega * t;
        if (inf_norm(r) <= tol) return true;
        rho = rho1;
    }
    return false;
}

struct Stepper {
    const HestonParams& p;
    const PutSpec& spec;
    const Lattice& lat;
    const PdeConfig& cfg;
    SurfaceKind kind;

    int nx, ny, n;
    SpMat L;
    std::vector<double> psi;
    std::vector<char> is_dirichlet;
    SolveDiagnostics diag;

    Stepper(const HestonParams& p_, const PutSpec& spec_, const Lattice& lat_,
            const PdeConfig& cfg_, SurfaceKind kind_)
        : p(p_), spec(spec_), lat(lat_), cfg(cfg_), kind(kind_) {
        p.validate();
        spec.validate();
        cfg.validate();
        check_coverage(lat, p, spec, -1.0);
        nx = lat.nx();
        ny = lat.ny();
        n = nx * ny;
        AssembledOperator op = assemble_operator(lat, p);
        L = std::move(op.matrix);
        diag.worst_offdiagonal = op.worst_offdiagonal;
        diag.m_matrix_ok = op.m_matrix_ok;
        psi = terminal_condition(lat, spec);
        is_dirichlet.assign(n, 0);
        for (int k = 0; k < ny; ++k) {
            is_dirichlet[lat.node(0, k)] = 1;
            is_dirichlet[lat.node(nx - 1, k)] = 1;
        }
    }

    // (I - w_dt L) with Dirichlet rows replaced by identity rows.
    SpMat system_matrix(double w_dt) const {
        std::vector<Triplet> trip;
        trip.reserve(static_cast<std::size_t>(L.nonZeros()) + n);
        for (int col = 0; col < L.outerSize(); ++col) {
            for (SpMat::InnerIterator it(L, col); it; ++it) {
                const int row = static_cast<int>(it.row());
                if (is_dirichlet[row]) continue;
                trip.emplace_back(row, col, -w_dt * it.value());
            }
        }
        for (int i = 0; i < n; ++i) trip.emplace_back(i, i, 1.0);
        SpMat A(n, n);
        A.setFromTriplets(trip.begin(), trip.end());
        A.makeCompressed();
        return A;
    }

    void set_boundary(Vec& v, double t) const {
        const double tau = spec.maturity - t;
        const double lo = x_min_boundary_value(p, spec, lat.x.front(), tau, kind);
        for (int k = 0; k < ny; ++k) {
            v[static_cast<int>(lat.node(0, k))] = lo;
            v[static_cast<int>(lat.node(nx - 1, k))] = 0.0;
        }
    }
};

}  // namespace

PriceSurface solve_european(const HestonParams& p, const PutSpec& spec, const Lattice& lat,
                            const PdeConfig& cfg) {
    Stepper st(p, spec, lat, cfg, SurfaceKind::European);
    const int nt = lat.nt(), n = st.n;
    const double dt = lat.dt();
    const bool cn = cfg.scheme == TimeScheme::CrankNicolson;

    SpMat A_full = st.system_matrix(dt);
    Eigen::SparseLU<SpMat> lu_full;
    lu_full.compute(A_full);
    if (lu_full.info() != Eigen::Success)
        throw SolverError("implicit system factorization failed", st.diag);

    SpMat A_half;
    Eigen::SparseLU<SpMat> lu_half;
    if (cn) {
        A_half = st.system_matrix(0.5 * dt);
        lu_half.compute(A_half);
        if (lu_half.info() != Eigen::Success)
            throw SolverError("Crank-Nicolson factorization failed", st.diag);
    }

    PriceSurface s;
    s.kind = SurfaceKind::European;
    s.lattice = lat;
    s.values.assign(static_cast<std::size_t>(nt) * n, 0.0);

    Vec u(n), rhs(n);
    for (int i = 0; i < n; ++i) u[i] = st.psi[i];
    std::copy(u.data(), u.data() + n, s.values.end() - n);

    for (int i = nt - 2; i >= 0; --i) {
        const bool use_cn = cn && (nt - 2 - i) >= cfg.rannacher_steps;
        if (use_cn)
            rhs = u + 0.5 * dt * (st.L * u);
        else
            rhs = u;
        st.set_boundary(rhs, lat.t[i]);

        const SpMat& A = use_cn ? A_half : A_full;
        const auto& lu = use_cn ? lu_half : lu_full;
        u = lu.solve(rhs);
        if (lu.info() != Eigen::Success)
            throw SolverError("linear solve failed in European stepper", st.diag);
        const double res = inf_norm(A * u - rhs);
        st.diag.max_linear_residual = std::max(st.diag.max_linear_residual, res);
        if (res > 1e-8 * spec.strike)
            throw SolverError("European linear residual " + std::to_string(res), st.diag);
        std::copy(u.data(), u.data() + n, s.values.begin() + static_cast<std::size_t>(i) * n);
    }

    st.diag.min_value = *std::min_element(s.values.begin(), s.values.end());
    s.diagnostics = st.diag;
    return s;
}

PriceSurface solve_american(const HestonParams& p, const PutSpec& spec, const Lattice& lat,
                            const PdeConfig& cfg) {
    Stepper st(p, spec, lat, cfg, SurfaceKind::American);
    const int nt = lat.nt(), n = st.n;
    const double dt = lat.dt();
    const bool cn = cfg.scheme == TimeScheme::CrankNicolson;
    const double newton_tol = cfg.newton_tol_rel * spec.strike;
    // The penalty scale is the largest obstacle source the lattice can
    // see, r K - delta s_min.  Matching it exactly (rather than the
    // looser r K bound) makes the in-exercise penalty offset vanish at
    // x_min, so the Dirichlet payoff data joins the interior without a
    // kink.  With r = 0 the source is never positive and the solution
    // dominates the payoff on its own, so the penalty may switch off.
    const double source_cap =
        std::max(p.r * spec.strike - p.delta * std::exp(lat.x.front()), 0.0);
    const PenaltyFamily zeta =
        make_penalty(cfg.penalty_epsilon_rel * spec.strike, source_cap);
    st.diag.penalty_epsilon = zeta.epsilon;

    SpMat A_full = st.system_matrix(dt);
    Eigen::SparseLU<SpMat> lu_full;
    lu_full.compute(A_full);
    if (lu_full.info() != Eigen::Success)
        throw SolverError("implicit system factorization failed", st.diag);

    SpMat A_half;
    Eigen::SparseLU<SpMat> lu_half;
    if (cn) {
        A_half = st.system_matrix(0.5 * dt);
        lu_half.compute(A_half);
        if (lu_half.info() != Eigen::Success)
            throw SolverError("Crank-Nicolson factorization failed", st.diag);
    }

    PriceSurface s;
    s.kind = SurfaceKind::American;
    s.lattice = lat;
    s.values.assign(static_cast<std::size_t>(nt) * n, 0.0);

    Vec u(n), rhs(n), v(n), resid(n), delta(n);
    for (int i = 0; i < n; ++i) u[i] = st.psi[i];
    std::copy(u.data(), u.data() + n, s.values.end() - n);

    Eigen::SparseLU<SpMat> lu_exact;

    // Penalize only nodes with a positive obstacle. Where the payoff is zero
    // the constraint is already slack (the solution stays nonnegative), and an
    // active ramp there would lift far out-of-the-money values onto an
    // epsilon-scale floor instead of letting them decay to zero.
    std::vector<char> penalized(static_cast<std::size_t>(n));
    for (int m = 0; m < n; ++m)
        penalized[m] = !st.is_dirichlet[m] && st.psi[m] > 0.0;

    auto penalized_residual = [&](const SpMat& A, const Vec& w, Vec& out) {
        out = A * w - rhs;
        for (int m = 0; m < n; ++m)
            if (penalized[m]) out[m] += dt * zeta.value(w[m] - st.psi[m]);
    };

    // The Jacobian shares the system matrix pattern; keep one copy and
    // refresh its values each Newton iteration instead of rebuilding.
    SpMat J = A_full;
    std::vector<Eigen::Index> diag_off(static_cast<std::size_t>(n));
    {
        const auto* outer = A_full.outerIndexPtr();
        const auto* inner = A_full.innerIndexPtr();
        for (int m = 0; m < n; ++m)
            for (Eigen::Index idx = outer[m]; idx < outer[m + 1]; ++idx)
                if (inner[idx] == m) diag_off[m] = idx;
    }

    for (int i = nt - 2; i >= 0; --i) {
        const bool use_cn = cn && (nt - 2 - i) >= cfg.rannacher_steps;
        const SpMat& A = use_cn ? A_half : A_full;
        const Eigen::SparseLU<SpMat>& lu = use_cn ? lu_half : lu_full;
        if (use_cn)
            rhs = u + 0.5 * dt * (st.L * u);
        else
            rhs = u;
        st.set_boundary(rhs, lat.t[i]);

        v = u;
        st.set_boundary(v, lat.t[i]);

        penalized_residual(A, v, resid);
        double res_norm = inf_norm(resid);
        int iter = 0;
        while (res_norm > newton_tol) {
            if (iter >= cfg.max_newton_iterations) {
                st.diag.final_penalty_residual = res_norm;
                st.diag.newton_iterations_max =
                    std::max(st.diag.newton_iterations_max, iter);
                throw SolverError("penalty Newton failed to converge at t = " +
                                      std::to_string(lat.t[i]) + ", residual " +
                                      std::to_string(res_norm),
                                  st.diag);
            }
            ++iter;

            std::copy(A.valuePtr(), A.valuePtr() + A.nonZeros(), J.valuePtr());
            for (int m = 0; m < n; ++m) {
                if (!penalized[m]) continue;
                const double sl = dt * zeta.slope(v[m] - st.psi[m]);
                if (sl != 0.0) J.valuePtr()[diag_off[m]] += sl;
            }

            // Inexact Newton: ask the Krylov solve for a fixed residual
            // reduction, tightening only near the finish line.
            const double lin_tol = std::max(0.01 * res_norm, 0.1 * newton_tol);
            bool ok = n <= 2048 ? false : bicgstab(J, lu, -resid, delta, lin_tol, 400);
            if (!ok) {
                if (n > 2048) ++st.diag.linear_solver_fallbacks;
                lu_exact.compute(J);
                if (lu_exact.info() != Eigen::Success)
                    throw SolverError("Newton linear solve failed", st.diag);
                delta = lu_exact.solve(-resid);
            }

            double lambda = 1.0;
            Vec trial(n), trial_res(n);
            for (int halvings = 0;; ++halvings) {
                trial = v + lambda * delta;
                penalized_residual(A, trial, trial_res);
                if (inf_norm(trial_res) < res_norm || halvings >= 5) break;
                lambda *= 0.5;
            }
            v = trial;
            resid = trial_res;
            res_norm = inf_norm(resid);
        }
        st.diag.newton_iterations_total += iter;
        st.diag.newton_iterations_max = std::max(st.diag.newton_iterations_max, iter);
        st.diag.max_penalty_residual = std::max(st.diag.max_penalty_residual, res_norm);
        st.diag.final_penalty_residual = res_norm;

        u = v;
        std::copy(u.data(), u.data() + n, s.values.begin() + static_cast<std::size_t>(i) * n);
    }

    double min_excess = std::numeric_limits<double>::infinity();
    for (int i = 0; i < nt; ++i)
        for (int m = 0; m < n; ++m)
            min_excess =
                std::min(min_excess, s.values[static_cast<std::size_t>(i) * n + m] - st.psi[m]);
    st.diag.min_excess_over_payoff = min_excess;
    st.diag.min_value = *std::min_element(s.values.begin(), s.values.end());
    s.diagnostics = st.diag;
    return s;
}

}  // namespace heston
