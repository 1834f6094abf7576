#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "heston/lattice.hpp"

namespace heston {

enum class SurfaceKind { European, American };

/// Solver telemetry carried by every surface.  The penalty fields stay at
/// their defaults for European solves.
struct SolveDiagnostics {
    int newton_iterations_total = 0;
    int newton_iterations_max = 0;
    double final_penalty_residual = 0.0;  ///< last backward step, inf norm
    double max_penalty_residual = 0.0;    ///< worst accepted step
    double penalty_epsilon = 0.0;
    double min_excess_over_payoff = 0.0;  ///< min(u - psi), American only
    double max_linear_residual = 0.0;
    double min_value = 0.0;
    bool m_matrix_ok = true;
    double worst_offdiagonal = 0.0;  ///< most negative off-diagonal weight
    int linear_solver_fallbacks = 0;
};

/// Values u(t_i, x_j, y_k) over the full lattice, slice-major in time.
/// The slice at t = maturity equals the payoff exactly.
struct PriceSurface {
    SurfaceKind kind = SurfaceKind::European;
    Lattice lattice;
    std::vector<double> values;
    SolveDiagnostics diagnostics;

    double at(int i, int j, int k) const {
        return values[static_cast<std::size_t>(i) * lattice.x.size() * lattice.y.size() +
                      lattice.node(j, k)];
    }
    double& at(int i, int j, int k) {
        return values[static_cast<std::size_t>(i) * lattice.x.size() * lattice.y.size() +
                      lattice.node(j, k)];
    }

    /// Bilinear interpolation in (x, y) on time slice i.
    double value(int i, double x, double y) const;
    /// Convenience: value at t = 0 for a spot/variance pair.
    double price_at(double spot, double y) const;
};

/// CSV rows t,x,y,value in lattice order with a header line.
std::string surface_to_csv(const PriceSurface& s);

/// Sidecar metadata: kind, lattice extents, diagnostics.
nlohmann::json surface_sidecar(const PriceSurface& s);

nlohmann::json diagnostics_to_json(const SolveDiagnostics& d);

}  // namespace heston
