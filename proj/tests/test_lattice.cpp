#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "heston/lattice.hpp"

using namespace heston;

namespace {

ProblemInputs desk_inputs() {
    ProblemInputs in;
    in.params = HestonParams{1.5, 0.04, 0.3, -0.5, 0.05, 0.02};
    in.spec = PutSpec{100.0, 1.0};
    in.spot = 100.0;
    in.y0 = 0.04;
    return in;
}

}  // namespace

TEST_CASE("lattice axes: counts, endpoints, uniform spacing") {
    GridConfig c;
    c.nt = 11;
    c.nx = 21;
    c.ny = 9;
    c.t_max = 2.0;
    c.x_center = std::log(100.0);
    c.x_pad_left = 0.8;
    c.x_pad_right = 1.2;
    c.y_max = 0.12;
    Lattice lat = build_lattice(c);

    CHECK(lat.nt() == 11);
    CHECK(lat.nx() == 21);
    CHECK(lat.ny() == 9);
    CHECK(lat.t.front() == 0.0);
    CHECK(lat.t.back() == 2.0);
    CHECK(lat.x.front() == doctest::Approx(c.x_center - 0.8));
    CHECK(lat.x.back() == doctest::Approx(c.x_center + 1.2));
    CHECK(lat.y.front() == 0.0);
    CHECK(lat.y.back() == doctest::Approx(0.12));

    for (int i = 1; i < lat.nt(); ++i)
        CHECK(lat.t[i] - lat.t[i - 1] == doctest::Approx(lat.dt()));
    for (int j = 1; j < lat.nx(); ++j)
        CHECK(lat.x[j] - lat.x[j - 1] == doctest::Approx(lat.dx()));
    for (int k = 1; k < lat.ny(); ++k)
        CHECK(lat.y[k] - lat.y[k - 1] == doctest::Approx(lat.y[1] - lat.y[0]));

    CHECK(lat.spot(0) == doctest::Approx(std::exp(lat.x[0])));
    CHECK(lat.node(0, 0) == 0);
    CHECK(lat.node(1, 0) == static_cast<std::size_t>(lat.ny()));
    CHECK(lat.node(1, 2) == static_cast<std::size_t>(lat.ny()) + 2);
}

TEST_CASE("square-root grading concentrates nodes near y = 0") {
    GridConfig c;
    c.nt = 3;
    c.nx = 5;
    c.ny = 9;
    c.y_max = 0.16;
    c.grading = YGrading::Sqrt;
    Lattice lat = build_lattice(c);
    CHECK(lat.y.front() == 0.0);
    CHECK(lat.y.back() == doctest::Approx(0.16));
    // y_k = y_max (k/(ny-1))^2, so increments grow with k.
    for (int k = 0; k < lat.ny(); ++k)
        CHECK(lat.y[k] == doctest::Approx(0.16 * (k / 8.0) * (k / 8.0)));
    for (int k = 2; k < lat.ny(); ++k)
        CHECK(lat.y[k] - lat.y[k - 1] > lat.y[k - 1] - lat.y[k - 2]);
}

TEST_CASE("lattice validation errors") {
    GridConfig c;
    c.nt = 1;
    CHECK_THROWS_AS(build_lattice(c), std::invalid_argument);
    c = GridConfig{};
    c.y_min = 0.01;  // degenerate row is part of the scheme
    CHECK_THROWS_AS(build_lattice(c), std::invalid_argument);
    c = GridConfig{};
    c.x_pad_left = 0.0;
    CHECK_THROWS_AS(build_lattice(c), std::invalid_argument);
    c = GridConfig{};
    c.x_pad_right = -1.0;
    CHECK_THROWS_AS(build_lattice(c), std::invalid_argument);
    c = GridConfig{};
    c.t_max = 0.0;
    CHECK_THROWS_AS(build_lattice(c), std::invalid_argument);
    c = GridConfig{};
    c.y_max = 0.0;
    CHECK_THROWS_AS(build_lattice(c), std::invalid_argument);
}

TEST_CASE("default grid covers the strike and the variance range") {
    ProblemInputs in = desk_inputs();
    GridConfig c = default_grid_config(in, 41, 21, 10);
    CHECK(c.x_center == doctest::Approx(std::log(100.0)));
    CHECK(c.y_max == doctest::Approx(3.0 * 0.04));
    // Left pad holds at least four standard deviations of terminal
    // log-spot at the base variance.
    CHECK(c.x_pad_left >= 4.0 * std::sqrt(0.04) - 1e-12);
    // Right pad reaches further: the far-field zero must sit where the
    // put is worthless even at the top variance row.
    CHECK(c.x_pad_right >= c.x_pad_left);
    CHECK(c.x_pad_right >= 4.7 * std::sqrt(c.y_max * 1.0) - 1e-12);

    Lattice lat = build_lattice(c);
    CHECK_NOTHROW(check_coverage(lat, in.params, in.spec, in.y0));

    SUBCASE("high initial variance widens both the pads and y_max") {
        ProblemInputs hot = desk_inputs();
        hot.y0 = 0.30;
        GridConfig h = default_grid_config(hot, 41, 21, 10);
        CHECK(h.y_max == doctest::Approx(0.90));
        CHECK(h.x_pad_left >= 4.0 * std::sqrt(0.30) - 1e-12);
    }

    SUBCASE("pad floor for short-dated low-variance setups") {
        ProblemInputs cold = desk_inputs();
        cold.params.theta = 0.0001;
        cold.y0 = 0.0001;
        cold.spec.maturity = 0.05;
        GridConfig f = default_grid_config(cold, 41, 21, 10);
        CHECK(f.x_pad_left >= 0.5);
    }
}

TEST_CASE("coverage check rejects narrow or shallow grids") {
    ProblemInputs in = desk_inputs();
    GridConfig c = default_grid_config(in, 41, 21, 10);

    GridConfig narrow = c;
    narrow.x_pad_left = 0.1;
    CHECK_THROWS_AS(
        check_coverage(build_lattice(narrow), in.params, in.spec, in.y0),
        std::invalid_argument);

    GridConfig shallow = c;
    shallow.y_max = 0.05;  // < 3 max(y0, theta)
    CHECK_THROWS_AS(
        check_coverage(build_lattice(shallow), in.params, in.spec, in.y0),
        std::invalid_argument);

    // y0 clause can be skipped with a negative sentinel.
    GridConfig deep = c;
    deep.y_max = 0.13;
    CHECK_NOTHROW(check_coverage(build_lattice(deep), in.params, in.spec, -1.0));
}

TEST_CASE("refine halves every mesh and keeps the bounds") {
    ProblemInputs in = desk_inputs();
    GridConfig c = default_grid_config(in, 41, 21, 10);
    GridConfig f = refine(c);
    CHECK(f.nx == 2 * c.nx - 1);
    CHECK(f.ny == 2 * c.ny - 1);
    CHECK(f.nt == 2 * c.nt - 1);
    Lattice coarse = build_lattice(c);
    Lattice fine = build_lattice(f);
    CHECK(fine.x.front() == doctest::Approx(coarse.x.front()));
    CHECK(fine.x.back() == doctest::Approx(coarse.x.back()));
    CHECK(fine.y.back() == doctest::Approx(coarse.y.back()));
    // Coarse nodes are a subset of fine nodes.
    for (int j = 0; j < coarse.nx(); ++j)
        CHECK(fine.x[2 * j] == doctest::Approx(coarse.x[j]));
    for (int k = 0; k < coarse.ny(); ++k)
        CHECK(fine.y[2 * k] == doctest::Approx(coarse.y[k]));
}

TEST_CASE("bracket clamps and interpolates") {
    std::vector<double> g{0.0, 1.0, 2.0, 4.0};
    Bracket b = bracket(g, 1.5);
    CHECK(b.i == 1);
    CHECK(b.w == doctest::Approx(0.5));
    b = bracket(g, 3.0);
    CHECK(b.i == 2);
    CHECK(b.w == doctest::Approx(0.5));
    // Exact nodes and the ends.
    b = bracket(g, 0.0);
    CHECK(b.i == 0);
    CHECK(b.w == doctest::Approx(0.0));
    b = bracket(g, 4.0);
    CHECK(b.i == 2);
    CHECK(b.w == doctest::Approx(1.0));
    // Clamping outside the range.
    b = bracket(g, -5.0);
    CHECK(b.i == 0);
    CHECK(b.w == 0.0);
    b = bracket(g, 9.0);
    CHECK(b.i == 2);
    CHECK(b.w == 1.0);
}
