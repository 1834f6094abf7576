#include "heston/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <stdexcept>

#include "heston/io.hpp"
#include "heston/rng.hpp"

namespace heston {

namespace {

constexpr double kShapeTolRel = 1e-6;    // node-level tolerance, times strike
constexpr double kStrictMarginRel = 1e-6;
constexpr double kSmoothFitBar = 0.05;
constexpr double kRefineFactor = 0.7;

nlohmann::json node_location(const Lattice& lat, int i, int j, int k) {
    return {{"t", lat.t[i]}, {"x", lat.x[j]}, {"y", lat.y[k]}};
}

void require_same_shape(const PriceSurface& a, const PriceSurface& b) {
    if (a.lattice.t != b.lattice.t || a.lattice.x != b.lattice.x ||
        a.lattice.y != b.lattice.y)
        throw std::invalid_argument("analysis: surfaces live on different lattices");
}

void require_matching_boundary(const PriceSurface& s, const ExerciseBoundary& b) {
    if (b.n_t() != s.lattice.nt() - 1 || b.n_y() != s.lattice.ny())
        throw std::invalid_argument("analysis: boundary does not match the surface");
}

ReportEntry skipped_entry(std::string id, std::string property, const char* why) {
    ReportEntry e;
    e.id = std::move(id);
    e.property = std::move(property);
    e.status = CheckStatus::Inconclusive;
    e.details["skipped"] = why;
    return e;
}

}  // namespace

ReportEntry check_dominance_european(const PriceSurface& american,
                                     const PriceSurface& european,
                                     double strike) {
    require_same_shape(american, european);
    ReportEntry e;
    e.id = "dominance_european";
    e.property = "American value dominates the European value at every node";
    double worst = std::numeric_limits<double>::infinity();
    const Lattice& lat = american.lattice;
    int wi = 0, wj = 0, wk = 0;
    for (int i = 0; i < lat.nt(); ++i)
        for (int j = 0; j < lat.nx(); ++j)
            for (int k = 0; k < lat.ny(); ++k) {
                const double d = american.at(i, j, k) - european.at(i, j, k);
                if (d < worst) {
                    worst = d;
                    wi = i, wj = j, wk = k;
                }
            }
    e.measured = worst;
    e.threshold = -kShapeTolRel * strike;
    e.status = worst >= e.threshold ? CheckStatus::Pass : CheckStatus::Fail;
    e.details["argmin"] = node_location(lat, wi, wj, wk);
    return e;
}

ReportEntry check_dominance_payoff(const PriceSurface& american, double strike) {
    ReportEntry e;
    e.id = "dominance_payoff";
    e.property =
        "American value stays above payoff within the penalty parameter and "
        "all values lie in [0, K]";
    const Lattice& lat = american.lattice;
    const int last = lat.nt() - 1;
    double worst = std::numeric_limits<double>::infinity();
    double vmin = std::numeric_limits<double>::infinity();
    double vmax = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < lat.nt(); ++i)
        for (int j = 0; j < lat.nx(); ++j)
            for (int k = 0; k < lat.ny(); ++k) {
                const double v = american.at(i, j, k);
                worst = std::min(worst, v - american.at(last, j, k));
                vmin = std::min(vmin, v);
                vmax = std::max(vmax, v);
            }
    const double eps = american.diagnostics.penalty_epsilon;
    e.measured = worst;
    e.threshold = -std::max(eps, 1e-9 * strike);
    const bool range_ok = vmin >= -kShapeTolRel * strike &&
                          vmax <= strike * (1.0 + kShapeTolRel);
    e.status = (worst >= e.threshold && range_ok) ? CheckStatus::Pass
                                                  : CheckStatus::Fail;
    e.details["min_value"] = vmin;
    e.details["max_value"] = vmax;
    return e;
}

ReportEntry check_monotone_y(const PriceSurface& surface, double strike) {
    ReportEntry e;
    e.id = "monotone_y";
    e.property = "value is nondecreasing in the variance coordinate at every node";
    const Lattice& lat = surface.lattice;
    double worst = std::numeric_limits<double>::infinity();
    int wi = 0, wj = 0, wk = 0;
    for (int i = 0; i < lat.nt(); ++i)
        for (int j = 0; j < lat.nx(); ++j)
            for (int k = 0; k + 1 < lat.ny(); ++k) {
                const double d = surface.at(i, j, k + 1) - surface.at(i, j, k);
                if (d < worst) {
                    worst = d;
                    wi = i, wj = j, wk = k;
                }
            }
    e.measured = worst;
    e.threshold = -kShapeTolRel * strike;
    e.status = worst >= e.threshold ? CheckStatus::Pass : CheckStatus::Fail;
    e.details["argmin"] = node_location(lat, wi, wj, wk);
    return e;
}

ReportEntry check_monotone_t(const PriceSurface& surface, double strike) {
    ReportEntry e;
    e.id = "monotone_t";
    e.property = "American value is nonincreasing in calendar time at every node";
    const Lattice& lat = surface.lattice;
    double worst = -std::numeric_limits<double>::infinity();
    int wi = 0, wj = 0, wk = 0;
    for (int i = 0; i + 1 < lat.nt(); ++i)
        for (int j = 0; j < lat.nx(); ++j)
            for (int k = 0; k < lat.ny(); ++k) {
                const double d = surface.at(i + 1, j, k) - surface.at(i, j, k);
                if (d > worst) {
                    worst = d;
                    wi = i, wj = j, wk = k;
                }
            }
    e.measured = worst;
    e.threshold = kShapeTolRel * strike;
    e.status = worst <= e.threshold ? CheckStatus::Pass : CheckStatus::Fail;
    e.details["argmax"] = node_location(lat, wi, wj, wk);
    return e;
}

ReportEntry check_convex_s(const PriceSurface& surface, double strike) {
    ReportEntry e;
    e.id = "convex_s";
    e.property =
        "value is convex and nonincreasing in spot on every slice, slopes in "
        "[-1, 0]";
    const Lattice& lat = surface.lattice;
    double worst = std::numeric_limits<double>::infinity();
    double slope_min = std::numeric_limits<double>::infinity();
    double slope_max = -std::numeric_limits<double>::infinity();
    int wi = 0, wj = 0, wk = 0;
    std::vector<double> s(lat.nx());
    for (int j = 0; j < lat.nx(); ++j) s[j] = lat.spot(j);
    for (int i = 0; i < lat.nt(); ++i)
        for (int k = 0; k < lat.ny(); ++k) {
            double left = (surface.at(i, 1, k) - surface.at(i, 0, k)) / (s[1] - s[0]);
            slope_min = std::min(slope_min, left);
            slope_max = std::max(slope_max, left);
            for (int j = 1; j + 1 < lat.nx(); ++j) {
                const double right =
                    (surface.at(i, j + 1, k) - surface.at(i, j, k)) / (s[j + 1] - s[j]);
                slope_min = std::min(slope_min, right);
                slope_max = std::max(slope_max, right);
                // Curvature in value units: slope change times the mean
                // cell width, comparable with the strike-relative margin.
                const double curv = (right - left) * 0.5 * (s[j + 1] - s[j - 1]);
                if (curv < worst) {
                    worst = curv;
                    wi = i, wj = j, wk = k;
                }
                left = right;
            }
        }
    e.measured = worst;
    e.threshold = -kShapeTolRel * strike;
    const bool slopes_ok =
        slope_min >= -1.0 - kShapeTolRel && slope_max <= kShapeTolRel;
    e.status =
        (worst >= e.threshold && slopes_ok) ? CheckStatus::Pass : CheckStatus::Fail;
    e.details["argmin"] = node_location(lat, wi, wj, wk);
    e.details["slope_min"] = slope_min;
    e.details["slope_max"] = slope_max;
    return e;
}

ReportEntry check_strict_convexity(const PriceSurface& surface,
                                   const ExerciseBoundary* boundary,
                                   double strike) {
    ReportEntry e;
    e.id = "strict_convexity";
    e.property =
        "second differences stay strictly positive on the interior "
        "continuation mask at the valuation date";
    const Lattice& lat = surface.lattice;
    e.threshold = kStrictMarginRel * strike;
    if (boundary) require_matching_boundary(surface, *boundary);
    if (lat.nx() < 6 || lat.ny() < 3) {
        e.status = CheckStatus::Inconclusive;
        e.details["masked_nodes"] = 0;
        return e;
    }
    const double dx = lat.dx();
    double worst = std::numeric_limits<double>::infinity();
    long masked = 0;
    int wj = 0, wk = 0;
    for (int k = 1; k + 1 < lat.ny(); ++k) {
        double x_floor = lat.x.front();
        if (boundary)
            x_floor = std::log(std::max(boundary->at(0, k), 1e-300)) + 3.0 * dx;
        for (int j = 2; j + 2 < lat.nx(); ++j) {
            if (lat.x[j] < x_floor) continue;
            const double sl = lat.spot(j - 1), sm = lat.spot(j), sr = lat.spot(j + 1);
            const double left = (surface.at(0, j, k) - surface.at(0, j - 1, k)) / (sm - sl);
            const double right = (surface.at(0, j + 1, k) - surface.at(0, j, k)) / (sr - sm);
            const double curv = (right - left) * 0.5 * (sr - sl);
            ++masked;
            if (curv < worst) {
                worst = curv;
                wj = j, wk = k;
            }
        }
    }
    e.details["masked_nodes"] = masked;
    if (masked == 0) {
        e.status = CheckStatus::Inconclusive;
        return e;
    }
    e.measured = worst;
    e.status = worst >= e.threshold ? CheckStatus::Pass : CheckStatus::Fail;
    e.details["argmin"] = node_location(lat, 0, wj, wk);
    return e;
}

ReportEntry check_moduli(const PriceSurface& surface, const HestonParams& p,
                         double strike) {
    ReportEntry e;
    e.id = "moduli";
    e.property =
        "value increments follow a Lipschitz modulus in log-spot and a "
        "square-root-type modulus in variance near y = 0";
    const Lattice& lat = surface.lattice;
    int jc = 0;
    for (int j = 1; j < lat.nx(); ++j)
        if (std::abs(lat.x[j] - lat.config.x_center) <
            std::abs(lat.x[jc] - lat.config.x_center))
            jc = j;

    // Dyadic variance increments from the degenerate edge, kept at or
    // above twice the first cell so interpolation cannot fake the
    // exponent.
    const double base = surface.at(0, jc, 0);
    const double first_cell = lat.y[1] - lat.y[0];
    std::vector<double> log_y, log_du;
    for (int m = 1; m <= 24; ++m) {
        const double ym = lat.config.y_max * std::ldexp(1.0, -m);
        if (ym < 2.0 * first_cell) break;
        const double du = surface.value(0, lat.x[jc], ym) - base;
        if (du <= 0.0) continue;
        log_y.push_back(std::log(ym));
        log_du.push_back(std::log(du));
    }
    double alpha = 0.0;
    bool alpha_available = log_y.size() >= 3;
    if (alpha_available) {
        const double n = static_cast<double>(log_y.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < log_y.size(); ++i) {
            sx += log_y[i];
            sy += log_du[i];
            sxx += log_y[i] * log_y[i];
            sxy += log_y[i] * log_du[i];
        }
        alpha = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }

    // Variance-direction difference quotients away from zero, where the
    // value is locally Lipschitz; and the log-spot Lipschitz ratio.
    double ratio_y = 0.0;
    bool ratio_seen = false;
    for (int k = 0; k + 1 < lat.ny(); ++k) {
        if (lat.y[k] < 0.5 * p.theta || lat.y[k + 1] > 0.5 * lat.config.y_max)
            continue;
        for (int j = 0; j < lat.nx(); ++j) {
            const double q = std::abs(surface.at(0, j, k + 1) - surface.at(0, j, k)) /
                             (lat.y[k + 1] - lat.y[k]);
            ratio_y = std::max(ratio_y, q);
            ratio_seen = true;
        }
    }
    double ratio_x = 0.0;
    for (int j = 0; j + 1 < lat.nx(); ++j)
        for (int k = 0; k < lat.ny(); ++k)
            ratio_x = std::max(ratio_x,
                               std::abs(surface.at(0, j + 1, k) - surface.at(0, j, k)) /
                                   lat.dx());

    const double ratio_bar = 100.0 * strike;
    const bool lipschitz_branch =
        feller_satisfied(p) && ratio_seen && ratio_y <= ratio_bar;
    e.measured = alpha_available ? alpha : 0.0;
    e.threshold = 0.45;
    if (alpha_available || lipschitz_branch || feller_satisfied(p))
        e.status = ((alpha_available && alpha >= 0.45) || lipschitz_branch)
                       ? CheckStatus::Pass
                       : CheckStatus::Fail;
    else
        e.status = CheckStatus::Inconclusive;
    e.details["alpha_points"] = static_cast<long>(log_y.size());
    e.details["lipschitz_ratio_x"] = ratio_x;
    e.details["lipschitz_ratio_y_upper"] = ratio_y;
    e.details["lipschitz_ratio_bound"] = ratio_bar;
    e.details["feller"] = feller_satisfied(p);
    return e;
}

ReportEntry check_boundary_range(const ExerciseBoundary& boundary, double strike) {
    ReportEntry e;
    e.id = "boundary_range";
    e.property = "exercise boundary levels lie strictly inside (0, K)";
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    long unresolved = 0;
    long resolved = 0;
    // Unresolved columns hold grid-edge sentinels, not boundary levels;
    // only resolved nodes carry a measurable b.
    for (int ti = 0; ti < boundary.n_t(); ++ti)
        for (int k = 0; k < boundary.n_y(); ++k) {
            if (!boundary.is_resolved(ti, k)) {
                ++unresolved;
                continue;
            }
            const double b = boundary.at(ti, k);
            lo = std::min(lo, b);
            hi = std::max(hi, b);
            ++resolved;
        }
    e.measured = hi;
    e.threshold = strike;
    if (resolved == 0)
        e.status = CheckStatus::Inconclusive;
    else
        e.status = (lo > 0.0 && hi < strike) ? CheckStatus::Pass : CheckStatus::Fail;
    e.details["min_level"] = lo;
    e.details["resolved_nodes"] = resolved;
    e.details["unresolved_nodes"] = unresolved;
    return e;
}

ReportEntry check_boundary_monotone_entry(const ExerciseBoundary& boundary) {
    ReportEntry e;
    e.id = "boundary_monotone";
    e.property =
        "boundary is nondecreasing toward maturity and nonincreasing in "
        "variance, within one interpolation cell";
    const BoundaryMonotonicity m = check_boundary_monotone(boundary);
    e.measured = std::max(m.worst_t_cells, m.worst_y_cells);
    e.threshold = 1.0;
    e.status = e.measured <= e.threshold ? CheckStatus::Pass : CheckStatus::Fail;
    e.details["worst_t_cells"] = m.worst_t_cells;
    e.details["worst_y_cells"] = m.worst_y_cells;
    e.details["pairs_checked"] = m.pairs_checked;
    return e;
}

ReportEntry check_t_sections_entry(const ExerciseBoundary& boundary) {
    ReportEntry e;
    e.id = "t_sections";
    e.property =
        "every time section of the boundary stays below all later sections, "
        "within one interpolation cell";
    const TSectionSummary s = check_t_sections(boundary);
    e.measured = s.worst_cells;
    e.threshold = 1.0;
    e.status = e.measured <= e.threshold ? CheckStatus::Pass : CheckStatus::Fail;
    e.details["largest_forward_step"] = s.largest_step;
    e.details["pairs_checked"] = s.pairs_checked;
    return e;
}

namespace {

/// Quadratic in spot through the three lattice nodes above the boundary
/// of one (t, y) column.  Estimates the contact point with the payoff
/// line and the fitted slope there; the level-set boundary b only seeds
/// the location when the quadratic misses the payoff nearby, because its
/// height offset (the extraction tolerance) would otherwise bias the
/// slope.
struct ContactFit {
    bool ok = false;
    double s_star = 0.0;    ///< exercise point for the slope reading
    double s_contact = 0.0; ///< best contact estimate, may sit below b
    double slope = 0.0;     ///< fitted du/ds at s_star
    int j1 = 0;             ///< first lattice node above the boundary
};

/// Columns whose boundary sits within max(3 dx, kStrikeBufferLog) of the
/// strike are rejected: there the stencil reads payoff-kink curvature,
/// and near maturity the contact layer outruns any fixed lattice.  The
/// absolute floor keeps the measured column set stable under refinement.
constexpr double kStrikeBufferLog = 0.10;

ContactFit fit_contact(const PriceSurface& surface, int ti, int k, double b,
                       double strike) {
    const Lattice& lat = surface.lattice;
    const double dx = lat.dx();
    const double xk = std::log(strike);
    const double xb = std::log(b);
    ContactFit f;
    const int jb = bracket(lat.x, xb).i + 1;
    if (jb + 2 >= lat.nx() || lat.x[jb + 2] >= xk ||
        xk - xb < std::max(3.0 * dx, kStrikeBufferLog))
        return f;

    // The level-set boundary overshoots the contact by an amount set by
    // the extraction tolerance, so a window anchored at b fits the
    // quadratic too far up and inherits that bias through its cubic
    // error.  Re-anchor the window at the current contact estimate and
    // refit; the anchor only moves down and settles within a few passes.
    int ja = jb;
    double s_star = b, s_contact = b, slope = -1.0;
    for (int pass = 0; pass < 3; ++pass) {
        const double s1 = lat.spot(ja), u1 = surface.at(ti, ja, k);
        const double s2 = lat.spot(ja + 1), u2 = surface.at(ti, ja + 1, k);
        const double s3 = lat.spot(ja + 2), u3 = surface.at(ti, ja + 2, k);
        const double d21 = (u2 - u1) / (s2 - s1);
        const double d32 = (u3 - u2) / (s3 - s2);
        const double curv = (d32 - d21) / (s3 - s1);  // half of p''
        // In Newton form around s1 the contact equation p(s) = K - s
        // reads curv*xi^2 + lin*xi + con = 0 with xi = s - s1; take the
        // root nearest s1.  The penalised solution sits an equilibrium
        // offset above the payoff inside the exercise region, so the
        // quadratic can miss the payoff line entirely; its closest
        // approach is then the point where the fitted slope equals -1,
        // which is the best contact estimate available even though no
        // slope gap can be read there.
        s_star = b;
        s_contact = b;
        if (curv > 0.0) {
            const double lin = d21 + curv * (s1 - s2) + 1.0;
            const double con = u1 - (strike - s1);
            const double disc = lin * lin - 4.0 * curv * con;
            bool have_root = false;
            if (disc >= 0.0) {
                const double root = s1 + (-lin + std::sqrt(disc)) / (2.0 * curv);
                if (std::abs(root - b) < 2.0 * (s2 - s1)) {
                    s_star = root;
                    s_contact = root;
                    have_root = true;
                }
            }
            if (!have_root) {
                const double nadir = s1 - lin / (2.0 * curv);
                if (std::abs(nadir - b) < 2.0 * (s2 - s1)) s_contact = nadir;
            }
        }
        slope = d21 + curv * (2.0 * s_star - s1 - s2);
        const int jn = bracket(lat.x, std::log(s_contact)).i + 1;
        if (jn >= ja || jn < 1) break;
        ja = jn;
    }
    f.ok = true;
    f.j1 = ja;
    f.s_star = s_star;
    f.s_contact = s_contact;
    f.slope = slope;
    return f;
}

}  // namespace

SmoothFitMeasure measure_smooth_fit_s(const PriceSurface& surface,
                                      const ExerciseBoundary& boundary,
                                      double strike) {
    require_matching_boundary(surface, boundary);
    const Lattice& lat = surface.lattice;
    const double dx = lat.dx();
    SmoothFitMeasure m;
    // The contact condition holds for y > 0 but its constants blow up
    // toward the degenerate row, where spot diffusion dies and the value
    // kinks at the exercise front.  Measure on the bulk variance band
    // [y_max/6, y_max/2] (the modulus check's band at default sizing),
    // away from both the degenerate row and the extrapolated top row.
    const double y_lo = lat.y.back() / 6.0;
    const double y_hi = lat.y.back() / 2.0;
    for (int ti = 0; ti < boundary.n_t(); ++ti) {
        for (int k = 1; k < boundary.n_y(); ++k) {
            const double yk = boundary.y[static_cast<std::size_t>(k)];
            if (yk < y_lo || yk > y_hi) continue;
            if (!boundary.is_resolved(ti, k)) {
                ++m.columns_skipped;
                continue;
            }
            const double b = boundary.at(ti, k);
            const double xb = std::log(b);
            const ContactFit f = fit_contact(surface, ti, k, b, strike);
            if (!f.ok) {
                ++m.columns_skipped;
                continue;
            }
            const double gap_here = std::abs(f.slope + 1.0);
            if (gap_here > m.gap) {
                m.gap = gap_here;
                m.worst_t = boundary.t[static_cast<std::size_t>(ti)];
                m.worst_y = boundary.y[static_cast<std::size_t>(k)];
            }
            ++m.columns_measured;

            // Difference quotient well inside the exercise region; the
            // payoff branch should pin it to -1.
            const int jlow = bracket(lat.x, xb - 3.0 * dx).i;
            if (jlow >= 1 && lat.x[jlow] <= xb - 3.0 * dx) {
                const double below =
                    (surface.at(ti, jlow, k) - surface.at(ti, jlow - 1, k)) /
                    (lat.spot(jlow) - lat.spot(jlow - 1));
                m.below_boundary_gap =
                    std::max(m.below_boundary_gap, std::abs(below + 1.0));
            }
        }
    }
    return m;
}

ReportEntry check_smooth_fit_s(const PriceSurface& fine,
                               const ExerciseBoundary& fine_boundary,
                               double strike,
                               std::optional<double> coarse_gap) {
    ReportEntry e;
    e.id = "smooth_fit_s";
    e.property =
        "spot derivative approaches -1 at the exercise boundary and the gap "
        "shrinks under refinement";
    const SmoothFitMeasure m = measure_smooth_fit_s(fine, fine_boundary, strike);
    e.measured = m.gap;
    e.threshold = kSmoothFitBar;
    if (m.columns_measured == 0) {
        e.status = CheckStatus::Inconclusive;
    } else {
        bool ok = m.gap <= kSmoothFitBar;
        if (coarse_gap) ok = ok && m.gap <= kRefineFactor * *coarse_gap + 1e-15;
        e.status = ok ? CheckStatus::Pass : CheckStatus::Fail;
    }
    e.details["columns_measured"] = m.columns_measured;
    e.details["worst"] = {{"t", m.worst_t}, {"y", m.worst_y}};
    e.details["columns_skipped"] = m.columns_skipped;
    e.details["below_boundary_gap"] = m.below_boundary_gap;
    if (coarse_gap) e.details["coarse_gap"] = *coarse_gap;
    return e;
}

SmoothFitYMeasure measure_smooth_fit_y(const PriceSurface& surface,
                                       const ExerciseBoundary& boundary,
                                       double strike) {
    require_matching_boundary(surface, boundary);
    const Lattice& lat = surface.lattice;
    const double dx = lat.dx();
    const double xk = std::log(strike);
    SmoothFitYMeasure m;
    // Typical |du/dy| per variance row, from continuation nodes of the
    // valuation slice between the boundary and the strike.  The cap at
    // the strike keeps far out-of-the-money nodes, where vega is
    // negligible, from diluting the scale.
    std::vector<double> row_scale(static_cast<std::size_t>(lat.ny()), 0.0);
    for (int k = 0; k + 1 < lat.ny(); ++k) {
        const double x_floor =
            std::log(std::max(boundary.at(0, k), 1e-300)) + 3.0 * dx;
        double acc = 0.0;
        long count = 0;
        for (int j = 0; j < lat.nx(); ++j) {
            if (lat.x[j] < x_floor || lat.x[j] > xk) continue;
            acc += std::abs(surface.at(0, j, k + 1) - surface.at(0, j, k)) /
                   (lat.y[k + 1] - lat.y[k]);
            ++count;
        }
        row_scale[static_cast<std::size_t>(k)] =
            count > 0 ? acc / static_cast<double>(count) : 0.0;
    }

    // Same bulk variance band as the spot-direction measurement; the
    // contact limit is not numerically resolvable next to the degenerate
    // row or on the extrapolated top row.
    const double y_lo = lat.y.back() / 6.0;
    const double y_hi = lat.y.back() / 2.0;
    for (int ti = 0; ti < boundary.n_t(); ++ti) {
        for (int k = 1; k + 1 < lat.ny(); ++k) {
            const double yk = boundary.y[static_cast<std::size_t>(k)];
            if (yk < y_lo || yk > y_hi) continue;
            if (!boundary.is_resolved(ti, k)) continue;
            const double scale = row_scale[static_cast<std::size_t>(k)];
            if (!(scale > 0.0)) continue;
            const ContactFit f =
                fit_contact(surface, ti, k, boundary.at(ti, k), strike);
            if (!f.ok) continue;
            // du/dy vanishes linearly in the distance above the contact
            // point, so sampling it at a node half a cell up measures the
            // offset of that node, not the limit.  Extrapolate the forward
            // y-difference quadratically through the three nodes nearest
            // the contact estimate, which may start one node below the
            // level-set boundary when the contact sits below it.
            const int je =
                std::min(bracket(lat.x, std::log(f.s_contact)).i + 1, lat.nx() - 3);
            const double dy = lat.y[k + 1] - lat.y[k];
            double g[3], s[3];
            for (int q = 0; q < 3; ++q) {
                s[q] = lat.spot(je + q);
                g[q] = (surface.at(ti, je + q, k + 1) -
                        surface.at(ti, je + q, k)) /
                       dy;
            }
            const double e21 = (g[1] - g[0]) / (s[1] - s[0]);
            const double e32 = (g[2] - g[1]) / (s[2] - s[1]);
            const double gcurv = (e32 - e21) / (s[2] - s[0]);
            const double ds = f.s_contact - s[0];
            const double slope = g[0] + e21 * ds + gcurv * ds * (f.s_contact - s[1]);
            if (std::abs(slope) / scale > m.ratio) {
                m.ratio = std::abs(slope) / scale;
                m.boundary_slope = std::abs(slope);
                m.interior_scale = scale;
                m.worst_t = boundary.t[static_cast<std::size_t>(ti)];
                m.worst_y = boundary.y[static_cast<std::size_t>(k)];
            }
            ++m.columns_measured;
        }
    }
    return m;
}

ReportEntry check_smooth_fit_y(const PriceSurface& fine,
                               const ExerciseBoundary& fine_boundary,
                               const HestonParams& p, double strike,
                               std::optional<double> coarse_ratio) {
    ReportEntry e;
    e.id = "smooth_fit_y";
    e.property =
        "variance derivative vanishes at the exercise boundary when the "
        "variance process stays positive";
    e.threshold = kSmoothFitBar;
    if (!feller_satisfied(p)) {
        e.status = CheckStatus::NotApplicable;
        e.details["feller"] = false;
        return e;
    }
    const SmoothFitYMeasure m =
        measure_smooth_fit_y(fine, fine_boundary, strike);
    e.measured = m.ratio;
    if (m.columns_measured == 0 || m.interior_scale <= 0.0) {
        e.status = CheckStatus::Inconclusive;
    } else {
        bool ok = m.ratio <= kSmoothFitBar;
        if (coarse_ratio) ok = ok && m.ratio < *coarse_ratio;
        e.status = ok ? CheckStatus::Pass : CheckStatus::Fail;
    }
    e.details["boundary_slope"] = m.boundary_slope;
    e.details["interior_scale"] = m.interior_scale;
    e.details["columns_measured"] = m.columns_measured;
    e.details["worst"] = {{"t", m.worst_t}, {"y", m.worst_y}};
    if (coarse_ratio) e.details["coarse_ratio"] = *coarse_ratio;
    return e;
}

PremiumEstimate eep_premium(const HestonParams& p, const PutSpec& spec,
                            double spot, double y0,
                            const PriceSurface& american,
                            const PriceSurface& european,
                            const ExerciseBoundary& boundary,
                            const McConfig& mc) {
    require_same_shape(american, european);
    require_matching_boundary(american, boundary);
    const Lattice& lat = american.lattice;
    for (int i = 0; i < boundary.n_t(); ++i)
        if (std::abs(boundary.t[i] - lat.t[i]) > 1e-12)
            throw std::invalid_argument("eep: boundary does not match the lattice");

    McConfig sim = mc;
    sim.steps = lat.nt() - 1;
    sim.dates = 1;  // unused by plain simulation; keep divisibility valid
    const PathBatch batch = simulate_heston(p, spot, y0, spec.maturity, sim);
    for (int i = 0; i < lat.nt(); ++i)
        if (std::abs(batch.times[i] - lat.t[i]) > 1e-9)
            throw std::invalid_argument("eep: simulation grid does not match the lattice");

    const int m = batch.n_times();
    const double dt = lat.dt();
    std::vector<double> integral(batch.n_paths);
    for (long path = 0; path < batch.n_paths; ++path) {
        double acc = 0.0;
        for (int i = 0; i < m; ++i) {
            const double t = batch.times[i];
            const double s = std::exp(batch.x_at(path, i));
            const double b = boundary.interp(t, batch.y_at(path, i));
            if (s > b) continue;
            const double w = (i == 0 || i == m - 1) ? 0.5 * dt : dt;
            acc += w * std::exp(-p.r * t) * (p.delta * s - p.r * spec.strike);
        }
        integral[path] = acc;
    }
    const MeanSe ms = mean_se(integral);

    PremiumEstimate out;
    out.premium = ms.mean;
    out.se = ms.se;
    out.n_paths = batch.n_paths;
    out.american = american.price_at(spot, y0);
    out.european = european.price_at(spot, y0);
    out.residual = std::abs(out.american - (out.european - out.premium));
    return out;
}

ReportEntry check_eep_identity(const PremiumEstimate& estimate,
                               const HestonParams& p, double strike) {
    ReportEntry e;
    e.id = "eep_identity";
    e.property =
        "American price equals European price minus the exercise-region "
        "premium within Monte Carlo error";
    e.measured = estimate.residual;
    e.threshold = std::max(3.0 * estimate.se, 0.005 * strike);
    bool ok = estimate.residual <= e.threshold;
    if (p.delta == 0.0) {
        // With no dividends the integrand is -rK inside the exercise
        // region, so the sampled premium cannot be positive.
        ok = ok && estimate.premium <= 0.0;
        e.details["sign_case"] = p.r == 0.0 ? "r=delta=0" : "delta=0";
        if (p.r == 0.0) ok = ok && estimate.premium == 0.0 && estimate.se == 0.0;
    }
    e.status = ok ? CheckStatus::Pass : CheckStatus::Fail;
    e.details["premium"] = estimate.premium;
    e.details["se"] = estimate.se;
    e.details["american"] = estimate.american;
    e.details["european"] = estimate.european;
    return e;
}

SymmetryResult price_by_symmetry(const ProblemInputs& in, const GridConfig& grid,
                                 const PdeConfig& pde, const McConfig& mc) {
    in.validate();
    const SymmetryDual dual = symmetry_dual(in.params, in.spec, in.spot);
    ProblemInputs dual_in{dual.params, dual.spec, dual.spot, in.y0};
    const GridConfig dual_grid =
        default_grid_config(dual_in, grid.nx, grid.ny, grid.nt);
    const Lattice lattice = build_lattice(dual_grid);
    const PriceSurface put_surface =
        solve_american(dual.params, dual.spec, lattice, pde);

    SymmetryResult out;
    out.put_at_dual = put_surface.price_at(dual.spot, in.y0);
    out.call_direct =
        lsmc_price(in.params, in.spec, in.spot, in.y0, mc, {}, PayoffKind::Call);
    if (in.params.delta == 0.0) {
        McConfig euro = mc;
        euro.stream_offset += 1ULL << 40;
        out.european_call = european_mc_price(in.params, in.spec, in.spot,
                                              in.y0, euro, PayoffKind::Call);
    }
    return out;
}

ReportEntry check_symmetry(const ProblemInputs& in, const GridConfig& grid,
                           const PdeConfig& pde, const McConfig& mc) {
    ReportEntry e;
    e.id = "symmetry";
    e.property =
        "American call via the swapped-parameter put solve matches the direct "
        "regression Monte Carlo call price";
    const SymmetryResult res = price_by_symmetry(in, grid, pde, mc);
    const double strike = in.spec.strike;
    e.measured = std::abs(res.put_at_dual - res.call_direct.value);
    e.threshold = std::max(3.0 * res.call_direct.se,
                           1e-3 * strike * std::max(1.0, in.spot / strike));
    bool ok = e.measured <= e.threshold;
    e.details["put_at_dual"] = res.put_at_dual;
    e.details["call_lsmc"] = res.call_direct.value;
    e.details["call_lsmc_se"] = res.call_direct.se;
    if (res.european_call) {
        // Without dividends early exercise of the call is worthless, so
        // both American routes must sit on the European price.
        const double gap = std::abs(res.call_direct.value - res.european_call->value);
        const double bar = 3.0 * (res.call_direct.se + res.european_call->se);
        ok = ok && gap <= bar;
        e.details["european_call_mc"] = res.european_call->value;
        e.details["european_call_gap"] = gap;
        e.details["european_call_bar"] = bar;
    }
    e.status = ok ? CheckStatus::Pass : CheckStatus::Fail;
    return e;
}

ReportEntry check_smoothed_convergence(const HestonParams& p,
                                       const PutSpec& spec, double spot,
                                       double y0, const McConfig& mc,
                                       const std::vector<int>& levels) {
    ReportEntry e;
    e.id = "smoothed_convergence";
    e.property =
        "smoothed-coefficient paths approach the truncated-scheme paths and "
        "bounded-payoff prices converge accordingly";
    if (levels.size() < 2)
        throw std::invalid_argument("smoothed convergence needs >= 2 levels");

    McConfig reg = mc;
    McConfig val = mc;
    val.stream_offset += 1ULL << 62;
    const PathBatch exact_reg = simulate_heston(p, spot, y0, spec.maturity, reg);
    const PathBatch exact_val = simulate_heston(p, spot, y0, spec.maturity, val);
    const int stride = mc.steps / mc.dates;
    std::vector<int> idx(mc.dates);
    for (int j = 0; j < mc.dates; ++j) idx[j] = (j + 1) * stride;
    const double exact_price =
        lsmc_price_batches(p, spec, exact_reg, exact_val, idx, mc.basis_degree,
                           PayoffKind::Put)
            .value;

    std::vector<double> dist_x, dist_y, gaps;
    for (int n : levels) {
        const PathBatch reg_n = simulate_smoothed(p, spot, y0, spec.maturity, n, reg);
        const PathBatch val_n = simulate_smoothed(p, spot, y0, spec.maturity, n, val);
        const SupDistance d = sup_distance(reg_n, exact_reg);
        dist_x.push_back(d.x);
        dist_y.push_back(d.y);
        const double price_n =
            lsmc_price_batches(p, spec, reg_n, val_n, idx, mc.basis_degree,
                               PayoffKind::Put)
                .value;
        gaps.push_back(std::abs(price_n - exact_price));
    }

    bool decreasing = true;
    for (std::size_t i = 1; i < levels.size(); ++i)
        decreasing = decreasing && dist_x[i] < dist_x[i - 1] &&
                     dist_y[i] < dist_y[i - 1];
    const bool halved = dist_x.back() <= 0.5 * dist_x.front() &&
                        dist_y.back() <= 0.5 * dist_y.front();
    bool gaps_decreasing = true;
    for (std::size_t i = 1; i < gaps.size(); ++i)
        gaps_decreasing = gaps_decreasing && gaps[i] < gaps[i - 1] + 1e-12;

    e.measured = std::max(dist_x.back() / std::max(dist_x.front(), 1e-300),
                          dist_y.back() / std::max(dist_y.front(), 1e-300));
    e.threshold = 0.5;
    e.status = (decreasing && halved && gaps_decreasing) ? CheckStatus::Pass
                                                         : CheckStatus::Fail;
    e.details["levels"] = levels;
    e.details["sup_distance_x"] = dist_x;
    e.details["sup_distance_y"] = dist_y;
    e.details["price_gaps"] = gaps;
    e.details["exact_price"] = exact_price;
    return e;
}

VerificationArtifacts run_verification(const ProblemInputs& in,
                                       const GridConfig& grid,
                                       const PdeConfig& pde, const McConfig& mc,
                                       int threads) {
    in.validate();
    const double strike = in.spec.strike;
    const Lattice lattice = build_lattice(grid);
    const GridConfig fine_grid = refine(grid);
    const Lattice fine_lattice = build_lattice(fine_grid);

    VerificationArtifacts art;
    // The fine solve dominates the runtime; overlap it with the base
    // solves when allowed to.
    std::future<PriceSurface> fine_future;
    const bool overlap = threads > 1;
    if (overlap)
        fine_future = std::async(std::launch::async, [&] {
            return solve_american(in.params, in.spec, fine_lattice, pde);
        });
    art.american = solve_american(in.params, in.spec, lattice, pde);
    art.european = solve_european(in.params, in.spec, lattice, pde);
    art.american_fine =
        overlap ? fine_future.get()
                : solve_american(in.params, in.spec, fine_lattice, pde);
    art.boundary = extract_boundary(art.american);
    art.boundary_fine = extract_boundary(art.american_fine);

    VerificationReport& rep = art.report;
    rep.entries.push_back(
        check_dominance_european(art.american, art.european, strike));
    rep.entries.push_back(check_dominance_payoff(art.american, strike));
    const bool gates_ok =
        rep.entries[0].passed() && rep.entries[1].passed() &&
        rep.entries[0].status != CheckStatus::Inconclusive;

    if (!gates_ok) {
        const char* why = "dominance gate failed";
        for (const char* id :
             {"monotone_y", "monotone_t", "convex_s", "strict_convexity",
              "moduli", "boundary_range", "boundary_monotone", "t_sections",
              "smooth_fit_s", "smooth_fit_y", "eep_identity", "symmetry",
              "smoothed_convergence"})
            rep.entries.push_back(skipped_entry(id, "", why));
        return art;
    }

    rep.entries.push_back(check_monotone_y(art.american, strike));
    rep.entries.push_back(check_monotone_t(art.american, strike));
    rep.entries.push_back(check_convex_s(art.american, strike));
    rep.entries.push_back(
        check_strict_convexity(art.american, &art.boundary, strike));
    rep.entries.push_back(check_moduli(art.american, in.params, strike));
    rep.entries.push_back(check_boundary_range(art.boundary, strike));
    rep.entries.push_back(check_boundary_monotone_entry(art.boundary));
    rep.entries.push_back(check_t_sections_entry(art.boundary));

    const SmoothFitMeasure coarse_s =
        measure_smooth_fit_s(art.american, art.boundary, strike);
    rep.entries.push_back(check_smooth_fit_s(
        art.american_fine, art.boundary_fine, strike, coarse_s.gap));
    std::optional<double> coarse_ratio;
    if (feller_satisfied(in.params))
        coarse_ratio =
            measure_smooth_fit_y(art.american, art.boundary, strike).ratio;
    rep.entries.push_back(check_smooth_fit_y(
        art.american_fine, art.boundary_fine, in.params, strike, coarse_ratio));

    art.premium = eep_premium(in.params, in.spec, in.spot, in.y0, art.american,
                              art.european, art.boundary, mc);
    rep.entries.push_back(check_eep_identity(art.premium, in.params, strike));
    rep.entries.push_back(check_symmetry(in, grid, pde, mc));
    rep.entries.push_back(check_smoothed_convergence(in.params, in.spec,
                                                     in.spot, in.y0, mc));
    return art;
}

ConvergenceTable run_convergence(const ProblemInputs& in, const GridConfig& base,
                                 const PdeConfig& pde, int levels, int threads) {
    if (levels < 2)
        throw std::invalid_argument("convergence study needs >= 2 levels");
    in.validate();
    (void)threads;

    ConvergenceTable table;
    std::vector<ExerciseBoundary> boundaries;
    GridConfig cfg = base;
    for (int lvl = 0; lvl < levels; ++lvl) {
        const Lattice lattice = build_lattice(cfg);
        const PriceSurface am = solve_american(in.params, in.spec, lattice, pde);
        const PriceSurface eu = solve_european(in.params, in.spec, lattice, pde);
        const ExerciseBoundary bd = extract_boundary(am);

        ConvergenceLevel row;
        row.nx = cfg.nx;
        row.ny = cfg.ny;
        row.nt = cfg.nt;
        row.american = am.price_at(in.spot, in.y0);
        row.european = eu.price_at(in.spot, in.y0);
        row.smooth_fit_gap = measure_smooth_fit_s(am, bd, in.spec.strike).gap;
        const ReportEntry my = check_monotone_y(am, in.spec.strike);
        const ReportEntry mt = check_monotone_t(am, in.spec.strike);
        row.monotonicity_violation =
            std::max(std::max(0.0, -my.measured), std::max(0.0, mt.measured));
        if (!table.levels.empty()) {
            row.change = std::abs(row.american - table.levels.back().american);
            if (table.levels.back().change > 0.0)
                row.ratio = row.change / table.levels.back().change;
        }
        table.levels.push_back(row);
        boundaries.push_back(bd);
        cfg = refine(cfg);
    }
    std::vector<const ExerciseBoundary*> ladder;
    for (const ExerciseBoundary& b : boundaries) ladder.push_back(&b);
    table.census = jump_census(ladder);
    for (std::size_t i = 0; i < table.levels.size(); ++i)
        table.levels[i].census_fraction = table.census.levels[i].fraction;
    return table;
}

std::string ConvergenceTable::to_csv() const {
    std::string out =
        "nx,ny,nt,american,european,change,ratio,smooth_fit_gap,"
        "monotonicity_violation,census_fraction\n";
    for (const ConvergenceLevel& l : levels) {
        out += std::to_string(l.nx) + ',' + std::to_string(l.ny) + ',' +
               std::to_string(l.nt) + ',';
        out += format_number(l.american) + ',' + format_number(l.european) + ',';
        out += format_number(l.change) + ',' + format_number(l.ratio) + ',';
        out += format_number(l.smooth_fit_gap) + ',';
        out += format_number(l.monotonicity_violation) + ',';
        out += format_number(l.census_fraction) + '\n';
    }
    return out;
}

}  // namespace heston
