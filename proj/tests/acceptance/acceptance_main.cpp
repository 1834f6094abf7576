// End-to-end acceptance suite.  Each numbered block exercises one release
// criterion against the desk defaults and prints exactly one PASS/FAIL line
// with the measured quantity and the tolerance pinned next to it.  The
// process exit code is the number of failed criteria, so the suite doubles
// as a gate in scripts.
//
// Criteria that need the same desk artifacts (surfaces, boundaries) share
// them through lazy caches; a solver failure inside one criterion marks
// that line FAIL and the rest keep running.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "heston/analysis.hpp"
#include "heston/cli.hpp"
#include "heston/io.hpp"
#include "heston/oracles.hpp"

namespace fs = std::filesystem;
using namespace heston;

namespace {

std::string num(double v, int prec = 4) {
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

bool is_pass(const ReportEntry& e) { return e.status == CheckStatus::Pass; }

struct Suite {
    int index = 0;
    int passed = 0;
    int failed = 0;

    void run(const std::string& label,
             const std::function<std::pair<bool, std::string>()>& body) {
        ++index;
        bool ok = false;
        std::string detail;
        try {
            std::tie(ok, detail) = body();
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("exception: ") + e.what();
        }
        ok ? ++passed : ++failed;
        std::printf("[%2d/11] %s  %s: %s\n", index, ok ? "PASS" : "FAIL",
                    label.c_str(), detail.c_str());
        std::fflush(stdout);
    }
};

// Penalized solve vs. exact backward induction on a lattice small enough to
// run the complementarity problem by dense linear algebra: one implicit
// Euler step per date, Dirichlet edges in x, node-wise max against the
// payoff.  Returns the worst node gap and the penalty parameter it must
// stay under.
std::pair<double, double> tiny_lattice_gap(const HestonParams& base) {
    HestonParams p = base;
    p.delta = 0.0;
    PutSpec spec{100.0, 0.25};
    GridConfig c;
    c.nt = 3;
    c.nx = 5;
    c.ny = 3;
    c.t_max = 0.25;
    c.x_center = std::log(100.0);
    c.x_pad_left = 0.6;
    c.x_pad_right = 0.6;
    c.y_max = 0.12;
    Lattice lat = build_lattice(c);

    PriceSurface am = solve_american(p, spec, lat);

    const int n = lat.nx() * lat.ny();
    const double dt = lat.dt();
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
    {
        Eigen::SparseMatrix<double> L = assemble_operator(lat, p).matrix;
        Eigen::MatrixXd Ld = Eigen::MatrixXd(L);
        for (int j = 1; j < lat.nx() - 1; ++j)
            for (int k = 0; k < lat.ny(); ++k) {
                const int row = static_cast<int>(lat.node(j, k));
                A.row(row) -= dt * Ld.row(row);
            }
    }
    std::vector<double> psi = terminal_condition(lat, spec);
    Eigen::VectorXd u(n);
    for (int m = 0; m < n; ++m) u[m] = psi[static_cast<std::size_t>(m)];

    double worst = 0.0;
    for (int i = lat.nt() - 2; i >= 0; --i) {
        Eigen::VectorXd rhs = u;
        const double tau = spec.maturity - lat.t[i];
        const double lo =
            x_min_boundary_value(p, spec, lat.x.front(), tau, SurfaceKind::American);
        for (int k = 0; k < lat.ny(); ++k) {
            rhs[static_cast<int>(lat.node(0, k))] = lo;
            rhs[static_cast<int>(lat.node(lat.nx() - 1, k))] = 0.0;
        }
        Eigen::VectorXd cont = A.partialPivLu().solve(rhs);
        for (int m = 0; m < n; ++m)
            u[m] = std::max(cont[m], psi[static_cast<std::size_t>(m)]);
        for (int j = 0; j < lat.nx(); ++j)
            for (int k = 0; k < lat.ny(); ++k)
                worst = std::max(
                    worst, std::abs(am.at(i, j, k) - u[static_cast<int>(lat.node(j, k))]));
    }
    return {worst, am.diagnostics.penalty_epsilon};
}

}  // namespace

int main() {
    // The desk setup is taken from the CLI defaults so this suite and the
    // command-line tool can never drift apart.
    RunConfig desk_cfg = parse_run_config(default_config_json());
    const ProblemInputs desk = desk_cfg.inputs;
    const PdeConfig pdecfg = desk_cfg.pde;
    const McConfig mccfg = desk_cfg.mc;
    const double K = desk.spec.strike;
    const Lattice desk_lat = build_lattice(resolve_grid(desk_cfg));

    // Non-Feller companion set: same desk parameters with the vol-of-vol
    // raised until 2 kappa theta < sigma^2.
    HestonParams nf = desk.params;
    nf.sigma = 0.6;

    // Lazy caches for artifacts shared between criteria.
    std::optional<PriceSurface> am_desk_c, eu_desk_c, am_nf_c;
    std::optional<ExerciseBoundary> bd_desk_c, bd_nf_c;
    auto desk_american = [&]() -> const PriceSurface& {
        if (!am_desk_c) am_desk_c = solve_american(desk.params, desk.spec, desk_lat, pdecfg);
        return *am_desk_c;
    };
    auto desk_european = [&]() -> const PriceSurface& {
        if (!eu_desk_c) eu_desk_c = solve_european(desk.params, desk.spec, desk_lat, pdecfg);
        return *eu_desk_c;
    };
    auto desk_boundary = [&]() -> const ExerciseBoundary& {
        if (!bd_desk_c) bd_desk_c = extract_boundary(desk_american());
        return *bd_desk_c;
    };
    auto nonfeller_american = [&]() -> const PriceSurface& {
        if (!am_nf_c) am_nf_c = solve_american(nf, desk.spec, desk_lat, pdecfg);
        return *am_nf_c;
    };
    auto nonfeller_boundary = [&]() -> const ExerciseBoundary& {
        if (!bd_nf_c) bd_nf_c = extract_boundary(nonfeller_american());
        return *bd_nf_c;
    };

    Suite suite;
    std::printf("acceptance suite: desk setup kappa=%g theta=%g sigma=%g rho=%g "
                "r=%g delta=%g K=%g T=%g grid=%dx%dx%d\n",
                desk.params.kappa, desk.params.theta, desk.params.sigma,
                desk.params.rho, desk.params.r, desk.params.delta, K,
                desk.spec.maturity, desk_lat.nx(), desk_lat.ny(), desk_lat.nt());
    std::fflush(stdout);

    // 1. Lattice price and regression Monte Carlo agree at the desk setup,
    //    within max(3 standard errors, 0.5% of strike), in under 3 minutes.
    suite.run("lattice and regression mc prices agree at the desk setup", [&] {
        const auto t0 = std::chrono::steady_clock::now();
        const double pde_price = desk_american().price_at(desk.spot, desk.y0);
        const LsmcResult ls =
            lsmc_price(desk.params, desk.spec, desk.spot, desk.y0, mccfg);
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        const double gap = std::abs(pde_price - ls.value);
        const double tol = std::max(3.0 * ls.se, 0.005 * K);
        const bool ok = gap <= tol && elapsed < 180.0;
        return std::make_pair(
            ok, "|" + num(pde_price) + " - " + num(ls.value) + "| = " + num(gap) +
                    " tol=" + num(tol) + " (3se=" + num(3.0 * ls.se) +
                    ") time=" + num(elapsed, 3) + "s limit=180s");
    });

    // 2. Vol-of-vol zero collapses the variance to a deterministic path;
    //    the European slice must match Gauss-Legendre quadrature within
    //    0.2% of strike and the American slice a variance-time binomial
    //    tree within 0.3% of strike.
    suite.run("deterministic-variance limit matches one-dimensional oracles", [&] {
        ProblemInputs lim = desk;
        lim.params.sigma = 0.0;
        lim.y0 = lim.params.theta;
        const Lattice lat = build_lattice(default_grid_config(lim));
        const PriceSurface eu = solve_european(lim.params, lim.spec, lat, pdecfg);
        const PriceSurface am = solve_american(lim.params, lim.spec, lat, pdecfg);
        const double total_var = deterministic_integrated_variance(
            lim.params.kappa, lim.params.theta, lim.y0, lim.spec.maturity);
        const double eu_oracle =
            lognormal_put_quadrature(K, lim.spec.maturity, lim.params.r,
                                     lim.params.delta, lim.spot, total_var);
        auto iv = [&](double t) {
            return deterministic_integrated_variance(lim.params.kappa,
                                                     lim.params.theta, lim.y0, t);
        };
        const double am_oracle = binomial_american_put(
            K, lim.spec.maturity, lim.params.r, lim.params.delta, lim.spot, iv, 4000);
        const double eu_gap = std::abs(eu.price_at(lim.spot, lim.y0) - eu_oracle);
        const double am_gap = std::abs(am.price_at(lim.spot, lim.y0) - am_oracle);
        const bool ok = eu_gap <= 0.002 * K && am_gap <= 0.003 * K;
        return std::make_pair(ok, "european gap=" + num(eu_gap) + " tol=" +
                                      num(0.002 * K) + ", american gap=" +
                                      num(am_gap) + " tol=" + num(0.003 * K));
    });

    // 3. On a lattice small enough for dense backward induction, the
    //    penalized solve matches the exact discrete complementarity
    //    solution to within the penalty parameter.
    suite.run("penalty solve matches dense backward induction on a tiny lattice", [&] {
        auto [worst, epsilon] = tiny_lattice_gap(desk.params);
        return std::make_pair(worst <= epsilon,
                              "max node gap=" + num(worst) + " <= epsilon=" + num(epsilon));
    });

    // 4. Monotonicity in variance, monotonicity toward maturity, and spot
    //    convexity all hold on the desk American surface, for the base
    //    parameters and for the non-Feller companion set.
    suite.run("surface monotonicity and convexity hold on both parameter sets", [&] {
        auto shape = [&](const PriceSurface& s) {
            ReportEntry my = check_monotone_y(s, K);
            ReportEntry mt = check_monotone_t(s, K);
            ReportEntry cs = check_convex_s(s, K);
            bool ok = is_pass(my) && is_pass(mt) && is_pass(cs);
            std::string d = "dy_min=" + num(my.measured, 3) + " dt_max=" +
                            num(mt.measured, 3) + " curv_min=" + num(cs.measured, 3);
            return std::make_pair(ok, d);
        };
        auto [ok_f, d_f] = shape(desk_american());
        auto [ok_n, d_n] = shape(nonfeller_american());
        return std::make_pair(ok_f && ok_n,
                              "feller(" + d_f + ") non-feller(" + d_n + ")");
    });

    // 5. Extracted exercise boundaries stay inside (0, K) at every resolved
    //    node and are monotone in t and y within one interpolation cell,
    //    with per-column time sections clean, on both parameter sets.
    suite.run("exercise boundary range and monotonicity hold on both parameter sets", [&] {
        auto audit = [&](const ExerciseBoundary& b) {
            ReportEntry r1 = check_boundary_range(b, K);
            ReportEntry r2 = check_boundary_monotone_entry(b);
            ReportEntry r3 = check_t_sections_entry(b);
            bool ok = is_pass(r1) && is_pass(r2) && is_pass(r3);
            std::string d = "max_level=" + num(r1.measured) + " mono_cells=" +
                            num(r2.measured, 3) + " section_cells=" + num(r3.measured, 3);
            return std::make_pair(ok, d);
        };
        auto [ok_f, d_f] = audit(desk_boundary());
        auto [ok_n, d_n] = audit(nonfeller_boundary());
        return std::make_pair(ok_f && ok_n,
                              "feller(" + d_f + ") non-feller(" + d_n + ")");
    });

    // 6. The simulated exercise-region premium closes the American/European
    //    gap within max(3 standard errors, 0.5% of strike); with no
    //    dividends the sampled premium cannot be positive, and with both
    //    rates zero it vanishes identically.
    suite.run("exercise premium identity holds and degenerate signs are exact", [&] {
        const PremiumEstimate est =
            eep_premium(desk.params, desk.spec, desk.spot, desk.y0, desk_american(),
                        desk_european(), desk_boundary(), mccfg);
        const ReportEntry main_entry = check_eep_identity(est, desk.params, K);

        McConfig mc_small = mccfg;
        mc_small.paths = 20000;
        auto sign_case = [&](double r, double delta) {
            ProblemInputs in = desk;
            in.params.r = r;
            in.params.delta = delta;
            const Lattice lat = build_lattice(default_grid_config(in, 81, 41, 50));
            const PriceSurface am = solve_american(in.params, in.spec, lat, pdecfg);
            const PriceSurface eu = solve_european(in.params, in.spec, lat, pdecfg);
            const ExerciseBoundary bd = extract_boundary(am);
            const PremiumEstimate e =
                eep_premium(in.params, in.spec, in.spot, in.y0, am, eu, bd, mc_small);
            return std::make_pair(check_eep_identity(e, in.params, K), e.premium);
        };
        auto [no_div, prem_nd] = sign_case(desk.params.r, 0.0);
        auto [all_zero, prem_z] = sign_case(0.0, 0.0);
        const bool ok = is_pass(main_entry) && is_pass(no_div) && is_pass(all_zero);
        return std::make_pair(
            ok, "residual=" + num(main_entry.measured) + " tol=" +
                    num(main_entry.threshold) + ", delta=0 premium=" + num(prem_nd) +
                    " (<=0), r=delta=0 premium=" + num(prem_z) + " (=0)");
    });

    // 7. Smooth fit at the boundary: the spot-derivative gap just above the
    //    boundary is at most 0.05 on the fine lattice and shrinks by a
    //    factor of at most 0.7 under refinement; the variance derivative at
    //    the contact point also shrinks under refinement on the Feller set
    //    and is reported not-applicable when the Feller condition fails.
    suite.run("smooth fit at the boundary improves under refinement", [&] {
        const GridConfig base = default_grid_config(desk, 81, 41, 50);
        const Lattice lat_b = build_lattice(base);
        const Lattice lat_f = build_lattice(refine(base));
        const PriceSurface am_b = solve_american(desk.params, desk.spec, lat_b, pdecfg);
        const PriceSurface am_f = solve_american(desk.params, desk.spec, lat_f, pdecfg);
        const ExerciseBoundary bd_b = extract_boundary(am_b);
        const ExerciseBoundary bd_f = extract_boundary(am_f);

        const SmoothFitMeasure s_b = measure_smooth_fit_s(am_b, bd_b, K);
        const ReportEntry s_entry = check_smooth_fit_s(am_f, bd_f, K, s_b.gap);
        const SmoothFitYMeasure y_b = measure_smooth_fit_y(am_b, bd_b, K);
        const SmoothFitYMeasure y_f = measure_smooth_fit_y(am_f, bd_f, K);
        const bool y_improves = y_f.ratio < y_b.ratio;
        const ReportEntry y_na = check_smooth_fit_y(
            nonfeller_american(), nonfeller_boundary(), nf, K, std::nullopt);
        const bool ok = is_pass(s_entry) && y_improves &&
                        y_na.status == CheckStatus::NotApplicable;
        return std::make_pair(
            ok, "s-gap " + num(s_b.gap) + " -> " + num(s_entry.measured) +
                    " (bar 0.05, factor 0.7), y-ratio " + num(y_b.ratio) + " -> " +
                    num(y_f.ratio) + ", non-feller y status=" +
                    std::string(to_string(y_na.status)));
    });

    // 8. Strict convexity above the boundary: the smallest second
    //    difference over the interior continuation mask must clear
    //    1e-6 * K on the desk surface.  Far from the strike the surface
    //    flattens toward the truncation data, so this bar is expected to
    //    be out of reach at any practical resolution; the suite measures
    //    it honestly rather than shrinking the mask.
    suite.run("strict spot convexity clears a fixed bar on the continuation mask", [&] {
        const ReportEntry e =
            check_strict_convexity(desk_american(), &desk_boundary(), K);
        const long masked = e.details.contains("masked_nodes")
                                ? e.details["masked_nodes"].get<long>()
                                : 0;
        return std::make_pair(is_pass(e),
                              "min curvature=" + num(e.measured, 3) + " bar=" +
                                  num(e.threshold, 3) + " over " +
                                  std::to_string(masked) + " masked nodes");
    });

    // 9. Put/call symmetry: an American call priced as a put at the dual
    //    data (rates swapped, correlation negated, strike and spot
    //    exchanged, variance drift tilted) matches direct regression Monte
    //    Carlo on the call; with no dividends both must also agree with a
    //    plain European call simulation.
    suite.run("put-call symmetry prices the call two independent ways", [&] {
        const ReportEntry at_desk =
            check_symmetry(desk, resolve_grid(desk_cfg), pdecfg, mccfg);
        ProblemInputs d0 = desk;
        d0.params.delta = 0.0;
        McConfig mc_small = mccfg;
        mc_small.paths = 20000;
        const ReportEntry no_div = check_symmetry(
            d0, default_grid_config(d0, 81, 41, 50), pdecfg, mc_small);
        const bool ok = is_pass(at_desk) && is_pass(no_div);
        return std::make_pair(
            ok, "desk gap=" + num(at_desk.measured) + " tol=" +
                    num(at_desk.threshold) + ", delta=0 gap=" + num(no_div.measured) +
                    " tol=" + num(no_div.threshold));
    });

    // 10. The smoothed-coefficient simulation scheme converges pathwise to
    //     the truncated scheme under shared noise: mean sup-distances
    //     strictly decrease over n in {4, 16, 64} with the last level at
    //     most half the first, and bounded-payoff regression prices
    //     approach the truncated-scheme price monotonically.
    suite.run("smoothed simulation scheme converges pathwise and in price", [&] {
        const ReportEntry e = check_smoothed_convergence(
            desk.params, desk.spec, desk.spot, desk.y0, mccfg, {4, 16, 64});
        return std::make_pair(is_pass(e),
                              "worst last/first sup-distance ratio=" +
                                  num(e.measured, 3) + " bar=" + num(e.threshold, 3));
    });

    // 11. Reruns with the same configuration and seed produce
    //     byte-identical result files, and so does changing the thread
    //     count: parallelism must not leak into the numbers.
    suite.run("result files are byte-identical across reruns and thread counts", [&] {
        const fs::path root = fs::temp_directory_path() / "heston_acceptance";
        fs::remove_all(root);
        fs::create_directories(root);
        auto run_into = [&](const std::string& name, int threads) {
            nlohmann::json j = {
                {"command", "eep"},
                {"grid", {{"nx", 41}, {"ny", 21}, {"nt", 20}}},
                {"mc", {{"paths", 20000}, {"steps", 20}, {"dates", 10}, {"seed", 777}}},
                {"output_dir", (root / name).string()},
                {"threads", threads}};
            RunConfig rc = parse_run_config(j);
            std::ostringstream log;
            if (run_command(rc, log) != 0)
                throw std::runtime_error("eep run returned nonzero");
            return read_text_file(root / name / "result.json");
        };
        const std::string a = run_into("first", 1);
        const std::string b = run_into("second", 1);
        const std::string c = run_into("threaded", 4);
        const bool ok = a == b && a == c;
        return std::make_pair(ok, std::string("rerun ") +
                                      (a == b ? "identical" : "DIFFERS") +
                                      ", threads 1 vs 4 " +
                                      (a == c ? "identical" : "DIFFERS") + " (" +
                                      std::to_string(a.size()) + " bytes)");
    });

    std::printf("acceptance: %d passed, %d failed\n", suite.passed, suite.failed);
    return suite.failed;
}
