#include "heston/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "heston/io.hpp"
#include "heston/lattice.hpp"

namespace heston {

double ExerciseBoundary::cell_width(double spot_level) const {
    const double xq = std::log(std::max(spot_level, 1e-300));
    const Bracket br = bracket(x_grid, xq);
    return std::exp(x_grid[br.i + 1]) - std::exp(x_grid[br.i]);
}

double ExerciseBoundary::interp(double ti, double yi) const {
    const Bracket bt = t.size() > 1 ? bracket(t, ti) : Bracket{};
    const Bracket by = y.size() > 1 ? bracket(y, yi) : Bracket{};
    const int k1 = y.size() > 1 ? by.i + 1 : by.i;
    const int t1 = t.size() > 1 ? bt.i + 1 : bt.i;
    const double lo = at(bt.i, by.i) + by.w * (at(bt.i, k1) - at(bt.i, by.i));
    const double hi = at(t1, by.i) + by.w * (at(t1, k1) - at(t1, by.i));
    return lo + bt.w * (hi - lo);
}

ExerciseBoundary extract_boundary(const PriceSurface& surface, double tol) {
    if (surface.kind != SurfaceKind::American)
        throw std::invalid_argument(
            "extract_boundary: surface has no exercise region");
    const double eps = surface.diagnostics.penalty_epsilon;
    if (tol <= 0.0) tol = 2.0 * eps;
    if (tol <= eps)
        throw std::invalid_argument(
            "extract_boundary: tolerance must exceed the penalty parameter");

    const Lattice& lat = surface.lattice;
    const int nt = lat.nt();
    const int nx = lat.nx();
    const int ny = lat.ny();

    ExerciseBoundary out;
    out.t.assign(lat.t.begin(), lat.t.end() - 1);
    out.y = lat.y;
    out.x_grid = lat.x;
    out.tol = tol;
    out.level.assign(static_cast<std::size_t>(nt - 1) * ny, 0.0);
    out.resolved.assign(static_cast<std::size_t>(nt - 1) * ny, 0);

    for (int ti = 0; ti < nt - 1; ++ti) {
        for (int k = 0; k < ny; ++k) {
            // Scan upward from the deep in-the-money edge: the contact
            // region is the initial run of nodes with u - psi <= tol.
            // Stopping at the first departure avoids mistaking the
            // far out-of-the-money tail, where both u and psi vanish,
            // for contact.
            int first_off = -1;
            double g_prev = 0.0;
            for (int j = 0; j < nx; ++j) {
                const double g =
                    surface.at(ti, j, k) - surface.at(nt - 1, j, k);
                if (g > tol) {
                    first_off = j;
                    break;
                }
                g_prev = g;
            }
            const std::size_t slot = static_cast<std::size_t>(ti) * ny + k;
            if (first_off == 0) {
                out.level[slot] = lat.spot(0);
                out.resolved[slot] = 0;
            } else if (first_off < 0) {
                out.level[slot] = lat.spot(nx - 1);
                out.resolved[slot] = 0;
            } else {
                const double g_here =
                    surface.at(ti, first_off, k) -
                    surface.at(nt - 1, first_off, k);
                const double frac = (tol - g_prev) / (g_here - g_prev);
                const double xb = lat.x[first_off - 1] + frac * lat.dx();
                out.level[slot] = std::exp(xb);
                out.resolved[slot] = 1;
            }
        }
    }
    return out;
}

BoundaryMonotonicity check_boundary_monotone(const ExerciseBoundary& b) {
    BoundaryMonotonicity out;
    const int nt = b.n_t();
    const int ny = b.n_y();
    for (int ti = 0; ti + 1 < nt; ++ti) {
        for (int k = 0; k < ny; ++k) {
            if (!b.is_resolved(ti, k) || !b.is_resolved(ti + 1, k)) continue;
            const double drop = b.at(ti, k) - b.at(ti + 1, k);
            if (drop > 0.0) {
                const double w = b.cell_width(b.at(ti, k));
                out.worst_t_cells = std::max(out.worst_t_cells, drop / w);
            }
            ++out.pairs_checked;
        }
    }
    for (int ti = 0; ti < nt; ++ti) {
        for (int k = 0; k + 1 < ny; ++k) {
            if (!b.is_resolved(ti, k) || !b.is_resolved(ti, k + 1)) continue;
            const double rise = b.at(ti, k + 1) - b.at(ti, k);
            if (rise > 0.0) {
                const double w = b.cell_width(b.at(ti, k + 1));
                out.worst_y_cells = std::max(out.worst_y_cells, rise / w);
            }
            ++out.pairs_checked;
        }
    }
    return out;
}

TSectionSummary check_t_sections(const ExerciseBoundary& b) {
    TSectionSummary out;
    const int nt = b.n_t();
    const int ny = b.n_y();
    for (int k = 0; k < ny; ++k) {
        // Suffix minimum over resolved later times; a section's level
        // must not exceed it by more than one local cell.
        double suffix_min = std::numeric_limits<double>::infinity();
        for (int ti = nt - 1; ti >= 0; --ti) {
            if (!b.is_resolved(ti, k)) continue;
            const double level = b.at(ti, k);
            if (std::isfinite(suffix_min)) {
                const double overhang = level - suffix_min;
                if (overhang > 0.0)
                    out.worst_cells = std::max(
                        out.worst_cells, overhang / b.cell_width(level));
                ++out.pairs_checked;
            }
            suffix_min = std::min(suffix_min, level);
        }
        for (int ti = 0; ti + 1 < nt; ++ti) {
            if (!b.is_resolved(ti, k) || !b.is_resolved(ti + 1, k)) continue;
            out.largest_step =
                std::max(out.largest_step, b.at(ti + 1, k) - b.at(ti, k));
        }
    }
    return out;
}

JumpCensus jump_census(const std::vector<const ExerciseBoundary*>& ladder) {
    JumpCensus census;
    for (const ExerciseBoundary* b : ladder) {
        JumpCensusLevel lvl;
        lvl.n_columns = b->n_y();
        for (int k = 0; k < b->n_y(); ++k) {
            bool jumped = false;
            for (int ti = 0; ti + 1 < b->n_t(); ++ti) {
                if (!b->is_resolved(ti, k) || !b->is_resolved(ti + 1, k))
                    continue;
                const double step = b->at(ti + 1, k) - b->at(ti, k);
                if (step > 5.0 * b->cell_width(b->at(ti + 1, k))) {
                    jumped = true;
                    break;
                }
            }
            if (jumped) ++lvl.jump_columns;
        }
        lvl.fraction = lvl.n_columns == 0
                           ? 0.0
                           : static_cast<double>(lvl.jump_columns) / lvl.n_columns;
        census.levels.push_back(lvl);
    }
    for (std::size_t i = 1; i < census.levels.size(); ++i)
        if (census.levels[i].fraction > census.levels[i - 1].fraction + 1e-12)
            census.fraction_nonincreasing = false;
    return census;
}

std::string boundary_to_csv(const ExerciseBoundary& b) {
    std::string out = "t,y,boundary,resolved\n";
    for (int ti = 0; ti < b.n_t(); ++ti) {
        for (int k = 0; k < b.n_y(); ++k) {
            out += format_number(b.t[ti]);
            out += ',';
            out += format_number(b.y[k]);
            out += ',';
            out += format_number(b.at(ti, k));
            out += ',';
            out += b.is_resolved(ti, k) ? '1' : '0';
            out += '\n';
        }
    }
    return out;
}

}  // namespace heston
