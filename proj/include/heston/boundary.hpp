#pragma once

#include <string>
#include <vector>

#include "heston/surface.hpp"

namespace heston {

/// Early-exercise boundary in spot terms on the (t, y) nodes of the
/// source lattice, excluding the terminal slice.  b(t, y) is the spot
/// level where the value first pulls away from the payoff by more than
/// the extraction tolerance.  Columns already off the payoff at the
/// lowest node pin to the smallest lattice spot (boundary below the
/// grid); columns that never pull away pin to the largest (boundary
/// beyond the grid, seen very close to maturity).  Both sentinel kinds
/// are flagged unresolved and carry no level information.
struct ExerciseBoundary {
    std::vector<double> t;        // n_t = lattice.nt() - 1 entries
    std::vector<double> y;
    std::vector<double> level;    // [ti * n_y + k], spot units
    std::vector<char> resolved;   // same layout, 1 when bracketed
    std::vector<double> x_grid;   // spot-log grid used for cell widths
    double tol = 0.0;

    int n_t() const { return static_cast<int>(t.size()); }
    int n_y() const { return static_cast<int>(y.size()); }
    double at(int ti, int k) const { return level[ti * n_y() + k]; }
    bool is_resolved(int ti, int k) const { return resolved[ti * n_y() + k] != 0; }

    /// Spot width of the lattice cell containing the given level.
    double cell_width(double spot_level) const;

    /// Bilinear in (t, y), clamped to the node range; queries past the
    /// last stored time reuse the last column.
    double interp(double ti, double yi) const;
};

/// Extracts the boundary from an American surface.  The tolerance must
/// exceed the penalty parameter recorded in the surface diagnostics;
/// tol <= 0 selects twice that parameter.  European surfaces are
/// rejected.
ExerciseBoundary extract_boundary(const PriceSurface& surface, double tol = 0.0);

/// Worst violation, in units of the local spot cell, of b nondecreasing
/// toward maturity and nonincreasing in y.  Unresolved nodes are
/// skipped.
struct BoundaryMonotonicity {
    double worst_t_cells = 0.0;
    double worst_y_cells = 0.0;
    long pairs_checked = 0;
};
BoundaryMonotonicity check_boundary_monotone(const ExerciseBoundary& boundary);

/// Worst violation, in local-cell units, of b(t) <= min over later
/// times of b, per y column, plus the largest single-step increase as a
/// shape diagnostic.
struct TSectionSummary {
    double worst_cells = 0.0;
    double largest_step = 0.0;   // spot units, max over columns of b(t+) - b(t)
    long pairs_checked = 0;
};
TSectionSummary check_t_sections(const ExerciseBoundary& boundary);

/// Share of y columns whose largest one-step time increase exceeds five
/// local cells.  Computed per boundary so a refinement ladder shows
/// whether apparent jumps shrink with the mesh; reporting only.
struct JumpCensusLevel {
    int n_columns = 0;
    int jump_columns = 0;
    double fraction = 0.0;
};
struct JumpCensus {
    std::vector<JumpCensusLevel> levels;
    bool fraction_nonincreasing = true;
};
JumpCensus jump_census(const std::vector<const ExerciseBoundary*>& ladder);

/// CSV with columns t,y,boundary,resolved in lattice order.
std::string boundary_to_csv(const ExerciseBoundary& boundary);

}  // namespace heston
