#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "heston/boundary.hpp"
#include "heston/lattice.hpp"
#include "heston/surface.hpp"

using namespace heston;

namespace {

Lattice test_lattice() {
    GridConfig c;
    c.nt = 4;
    c.nx = 41;
    c.ny = 5;
    c.t_max = 1.0;
    c.x_center = std::log(100.0);
    c.x_pad_left = 0.3;
    c.x_pad_right = 0.3;
    c.y_max = 0.12;
    return build_lattice(c);
}

/// American-looking surface whose distance to the terminal slice is the
/// linear ramp x - xb(ti, k); the level set g = tol then sits at
/// exactly xb + tol, which the extractor must reproduce.
PriceSurface ramp_surface(const Lattice& lat,
                          const std::vector<std::vector<double>>& xb) {
    PriceSurface s;
    s.kind = SurfaceKind::American;
    s.lattice = lat;
    s.diagnostics.penalty_epsilon = 1e-4;
    s.values.assign(static_cast<std::size_t>(lat.nt()) * lat.nx() * lat.ny(), 0.0);
    for (int j = 0; j < lat.nx(); ++j)
        for (int k = 0; k < lat.ny(); ++k)
            s.at(lat.nt() - 1, j, k) = std::max(100.0 - lat.spot(j), 0.0);
    for (int ti = 0; ti < lat.nt() - 1; ++ti)
        for (int j = 0; j < lat.nx(); ++j)
            for (int k = 0; k < lat.ny(); ++k)
                s.at(ti, j, k) = s.at(lat.nt() - 1, j, k) + (lat.x[j] - xb[ti][k]);
    return s;
}

ExerciseBoundary hand_boundary(const std::vector<double>& t,
                               const std::vector<double>& y,
                               const std::vector<double>& level,
                               const std::vector<char>& resolved) {
    ExerciseBoundary b;
    b.t = t;
    b.y = y;
    b.level = level;
    b.resolved = resolved;
    const int n = 41;
    b.x_grid.resize(n);
    for (int i = 0; i < n; ++i)
        b.x_grid[i] = std::log(80.0) + (std::log(120.0) - std::log(80.0)) * i / (n - 1);
    b.tol = 2e-4;
    return b;
}

}  // namespace

TEST_CASE("level-set extraction inverts a linear ramp exactly") {
    Lattice lat = test_lattice();
    std::vector<std::vector<double>> xb(3, std::vector<double>(5));
    for (int ti = 0; ti < 3; ++ti)
        for (int k = 0; k < 5; ++k)
            xb[ti][k] = std::log(92.0) + 0.02 * ti - 0.015 * k;
    PriceSurface s = ramp_surface(lat, xb);

    ExerciseBoundary b = extract_boundary(s);
    CHECK(b.tol == doctest::Approx(2e-4));
    REQUIRE(b.n_t() == 3);
    REQUIRE(b.n_y() == 5);
    for (int ti = 0; ti < 3; ++ti)
        for (int k = 0; k < 5; ++k) {
            REQUIRE(b.is_resolved(ti, k));
            CHECK(b.at(ti, k) ==
                  doctest::Approx(std::exp(xb[ti][k] + b.tol)).epsilon(1e-10));
        }

    // A larger tolerance moves the level set strictly outward.
    ExerciseBoundary wide = extract_boundary(s, 1e-3);
    for (int ti = 0; ti < 3; ++ti)
        for (int k = 0; k < 5; ++k) {
            CHECK(wide.at(ti, k) > b.at(ti, k));
            CHECK(wide.at(ti, k) ==
                  doctest::Approx(std::exp(xb[ti][k] + 1e-3)).epsilon(1e-10));
        }

    // Same surface, same tolerance: identical output.
    ExerciseBoundary again = extract_boundary(s);
    CHECK(again.level == b.level);
    CHECK(again.resolved == b.resolved);
}

TEST_CASE("columns whose boundary leaves the grid come back unresolved") {
    Lattice lat = test_lattice();
    std::vector<std::vector<double>> xb(3, std::vector<double>(5));
    for (int ti = 0; ti < 3; ++ti)
        for (int k = 0; k < 5; ++k)
            xb[ti][k] = std::log(92.0);
    xb[1][0] = lat.x.front() - 0.5;  // boundary below the grid
    xb[1][4] = lat.x.back() + 0.5;   // value never pulls away
    PriceSurface s = ramp_surface(lat, xb);
    ExerciseBoundary b = extract_boundary(s);

    CHECK_FALSE(b.is_resolved(1, 0));
    CHECK(b.at(1, 0) == doctest::Approx(lat.spot(0)));
    CHECK_FALSE(b.is_resolved(1, 4));
    CHECK(b.at(1, 4) == doctest::Approx(lat.spot(lat.nx() - 1)));
    CHECK(b.is_resolved(1, 2));
    CHECK(b.is_resolved(0, 0));
    CHECK(b.is_resolved(0, 4));
}

TEST_CASE("extraction rejects European surfaces and tolerances inside the penalty") {
    Lattice lat = test_lattice();
    std::vector<std::vector<double>> xb(3, std::vector<double>(5, std::log(92.0)));
    PriceSurface s = ramp_surface(lat, xb);
    CHECK_THROWS_AS(extract_boundary(s, 1e-4), std::invalid_argument);
    CHECK_THROWS_AS(extract_boundary(s, 5e-5), std::invalid_argument);
    s.kind = SurfaceKind::European;
    CHECK_THROWS_AS(extract_boundary(s), std::invalid_argument);
}

TEST_CASE("cell width reports the spot extent of the containing cell") {
    ExerciseBoundary b = hand_boundary({0.0}, {0.0}, {95.0}, {1});
    const Bracket br = bracket(b.x_grid, std::log(95.0));
    const double expect = std::exp(b.x_grid[br.i + 1]) - std::exp(b.x_grid[br.i]);
    CHECK(b.cell_width(95.0) == doctest::Approx(expect));
    CHECK(b.cell_width(95.0) > 0.0);
}

TEST_CASE("boundary interpolation: nodes, midpoints, and clamped queries") {
    const std::vector<double> t{0.0, 0.5};
    const std::vector<double> y{0.0, 0.1};
    const std::vector<double> level{90.0, 88.0, 94.0, 92.0};  // row-major (t, y)
    ExerciseBoundary b = hand_boundary(t, y, level, {1, 1, 1, 1});
    CHECK(b.interp(0.0, 0.0) == doctest::Approx(90.0));
    CHECK(b.interp(0.5, 0.1) == doctest::Approx(92.0));
    CHECK(b.interp(0.25, 0.0) == doctest::Approx(92.0));
    CHECK(b.interp(0.0, 0.05) == doctest::Approx(89.0));
    CHECK(b.interp(0.25, 0.05) == doctest::Approx(91.0));
    // Past the stored range the nearest column answers.
    CHECK(b.interp(3.0, 0.05) == doctest::Approx(93.0));
    CHECK(b.interp(-1.0, 0.2) == doctest::Approx(88.0));
}

TEST_CASE("monotonicity audit flags only genuine violations, in cell units") {
    const std::vector<double> t{0.0, 0.5, 0.75};
    const std::vector<double> y{0.0, 0.06, 0.12};
    // Rising toward maturity, falling in y: fully monotone.
    std::vector<double> good{90.0, 89.0, 88.0,
                             91.0, 90.0, 89.0,
                             92.0, 91.0, 90.0};
    ExerciseBoundary gb = hand_boundary(t, y, good, std::vector<char>(9, 1));
    BoundaryMonotonicity gm = check_boundary_monotone(gb);
    CHECK(gm.worst_t_cells == 0.0);
    CHECK(gm.worst_y_cells == 0.0);
    CHECK(gm.pairs_checked == 12);

    // One drop toward maturity and one rise in y.
    std::vector<double> bad = good;
    bad[3 + 1] = 87.0;  // t-section at (ti=1, k=1) dips below its predecessor
    bad[6 + 2] = 93.5;  // y-section at (ti=2, k=2) rises above its neighbour
    ExerciseBoundary bb = hand_boundary(t, y, bad, std::vector<char>(9, 1));
    BoundaryMonotonicity bm = check_boundary_monotone(bb);
    CHECK(bm.worst_t_cells == doctest::Approx(2.0 / bb.cell_width(89.0)).epsilon(1e-6));
    CHECK(bm.worst_y_cells == doctest::Approx(2.5 / bb.cell_width(93.5)).epsilon(1e-6));

    // Unresolved nodes drop out of the audit entirely.
    std::vector<char> mask(9, 1);
    mask[3 + 1] = 0;
    mask[6 + 2] = 0;
    ExerciseBoundary masked = hand_boundary(t, y, bad, mask);
    BoundaryMonotonicity mm = check_boundary_monotone(masked);
    CHECK(mm.worst_t_cells == 0.0);
    CHECK(mm.worst_y_cells == 0.0);
    CHECK(mm.pairs_checked < gm.pairs_checked);
}

TEST_CASE("t-section audit measures overhang over the later-time minimum") {
    const std::vector<double> t{0.0, 0.25, 0.5, 0.75};
    const std::vector<double> y{0.0};
    // 92 at t=0 overhangs the later minimum 90 by two spot units.
    std::vector<double> level{92.0, 90.0, 91.0, 94.0};
    ExerciseBoundary b = hand_boundary(t, y, level, std::vector<char>(4, 1));
    TSectionSummary s = check_t_sections(b);
    CHECK(s.worst_cells == doctest::Approx(2.0 / b.cell_width(92.0)).epsilon(1e-6));
    CHECK(s.largest_step == doctest::Approx(3.0));
    CHECK(s.pairs_checked == 3);

    std::vector<double> clean{90.0, 90.5, 91.0, 94.0};
    ExerciseBoundary cb = hand_boundary(t, y, clean, std::vector<char>(4, 1));
    CHECK(check_t_sections(cb).worst_cells == 0.0);
}

TEST_CASE("jump census counts columns with multi-cell steps per ladder level") {
    const std::vector<double> t{0.0, 0.25, 0.5};
    const std::vector<double> y{0.0, 0.06};
    // Column 0 jumps by ~8 spot units in one step, far over five cells.
    std::vector<double> coarse{86.0, 90.0, 94.0, 90.5, 95.0, 91.0};
    ExerciseBoundary cb = hand_boundary(t, y, coarse, std::vector<char>(6, 1));
    std::vector<double> fine{86.0, 90.0, 86.5, 90.2, 87.0, 90.4};
    ExerciseBoundary fb = hand_boundary(t, y, fine, std::vector<char>(6, 1));

    JumpCensus census = jump_census({&cb, &fb});
    REQUIRE(census.levels.size() == 2);
    CHECK(census.levels[0].n_columns == 2);
    CHECK(census.levels[0].jump_columns == 1);
    CHECK(census.levels[0].fraction == doctest::Approx(0.5));
    CHECK(census.levels[1].jump_columns == 0);
    CHECK(census.fraction_nonincreasing);

    JumpCensus reversed = jump_census({&fb, &cb});
    CHECK_FALSE(reversed.fraction_nonincreasing);
}

TEST_CASE("boundary export carries one row per (t, y) node") {
    const std::vector<double> t{0.0, 0.5};
    const std::vector<double> y{0.0, 0.06, 0.12};
    std::vector<double> level{90.0, 89.0, 88.0, 91.0, 90.0, 89.0};
    std::vector<char> resolved{1, 1, 0, 1, 1, 1};
    ExerciseBoundary b = hand_boundary(t, y, level, resolved);
    std::string csv = boundary_to_csv(b);
    CHECK(csv.rfind("t,y,boundary,resolved\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
    CHECK(csv.find(",0\n") != std::string::npos);
}
