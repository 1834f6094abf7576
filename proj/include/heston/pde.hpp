#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/SparseCore>

#include "heston/model.hpp"
#include "heston/penalty.hpp"
#include "heston/surface.hpp"

namespace heston {

enum class TimeScheme { ImplicitEuler, CrankNicolson };

struct PdeConfig {
    TimeScheme scheme = TimeScheme::ImplicitEuler;
    int rannacher_steps = 2;           ///< leading implicit steps under CN
    double penalty_epsilon_rel = 1e-4; ///< epsilon = rel * strike
    double newton_tol_rel = 1e-9;      ///< residual tolerance = rel * strike
    int max_newton_iterations = 50;

    void validate() const;
};

/// Thrown when the backward stepper fails to converge; carries the solver
/// state gathered so far.
class SolverError : public std::runtime_error {
  public:
    SolverError(const std::string& what, SolveDiagnostics diag)
        : std::runtime_error(what), diagnostics(diag) {}
    SolveDiagnostics diagnostics;
};

/// Discrete generator on one time slice, row index = j * ny + k.
/// Interior rows use central second differences, a sign-adapted seven-point
/// cross stencil, and first-order terms that fall back from central to
/// upwind whenever a neighbour weight would go negative.  The y = 0 row
/// carries the degenerate first-order operator (r - delta) d_x +
/// kappa theta d_y - r with one-sided differences and no second-order
/// couplings; the y_max row imposes d^2u/dy^2 = 0 by dropping the
/// second-order variance terms and upwinding the (inward) drift.  x-edge
/// rows hold one-sided first-order forms but are overwritten by Dirichlet
/// conditions inside the solvers.
struct AssembledOperator {
    Eigen::SparseMatrix<double> matrix;
    double worst_offdiagonal = 0.0;  ///< most negative neighbour weight
    bool m_matrix_ok = true;
};

AssembledOperator assemble_operator(const Lattice& lattice, const HestonParams& p, double t = 0.0);

/// (K - e^x)^+ over one slice.
std::vector<double> terminal_condition(const Lattice& lattice, const PutSpec& spec);

/// Dirichlet value at the low-spot edge: discounted strike minus the
/// dividend-discounted spot, clipped at the payoff for American surfaces.
double x_min_boundary_value(const HestonParams& p, const PutSpec& spec, double x_min,
                            double time_to_maturity, SurfaceKind kind);

PriceSurface solve_european(const HestonParams& p, const PutSpec& spec, const Lattice& lattice,
                            const PdeConfig& config = {});

/// Penalized obstacle solve: each backward step runs a damped Newton
/// iteration on  A v + dt zeta(v - psi) = rhs  until the residual falls
/// under newton_tol_rel * strike.  Non-convergence raises SolverError.
PriceSurface solve_american(const HestonParams& p, const PutSpec& spec, const Lattice& lattice,
                            const PdeConfig& config = {});

}  // namespace heston
