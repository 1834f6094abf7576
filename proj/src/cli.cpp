#include "heston/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "heston/analysis.hpp"
#include "heston/boundary.hpp"
#include "heston/io.hpp"

namespace heston {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const char* const kCommands[] = {"price", "boundary", "eep",
                                 "verify", "converge", "symmetry"};

void expect_object(const json& j, const std::string& ctx) {
    if (!j.is_object())
        throw ConfigError("config: " + ctx + " must be an object");
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& ctx) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) known = true;
        if (!known)
            throw ConfigError("config: unknown key \"" + item.key() + "\" in " + ctx);
    }
}

double get_num(const json& j, const char* key, double dflt, const std::string& ctx) {
    if (!j.contains(key)) return dflt;
    if (!j.at(key).is_number())
        throw ConfigError("config: " + ctx + "." + key + " must be a number");
    return j.at(key).get<double>();
}

long get_int(const json& j, const char* key, long dflt, const std::string& ctx) {
    if (!j.contains(key)) return dflt;
    if (!j.at(key).is_number_integer())
        throw ConfigError("config: " + ctx + "." + key + " must be an integer");
    return j.at(key).get<long>();
}

std::string get_str(const json& j, const char* key, const std::string& dflt,
                    const std::string& ctx) {
    if (!j.contains(key)) return dflt;
    if (!j.at(key).is_string())
        throw ConfigError("config: " + ctx + "." + key + " must be a string");
    return j.at(key).get<std::string>();
}

/// Creates <dir>/.lock exclusively for the duration of a run so two
/// runs cannot interleave writes in one output directory.
class DirLock {
  public:
    explicit DirLock(const fs::path& dir) : path_(dir / ".lock") {
        const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0)
            throw ConfigError("output directory is locked by another run: " +
                              path_.string());
        ::close(fd);
    }
    ~DirLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

  private:
    fs::path path_;
};

void append_mc_log(const fs::path& dir, const json& record) {
    std::ofstream out(dir / "mc_results.jsonl", std::ios::app | std::ios::binary);
    out << record.dump() << '\n';
}

json premium_to_json(const PremiumEstimate& est) {
    return {{"premium", est.premium},  {"se", est.se},
            {"american", est.american}, {"european", est.european},
            {"residual", est.residual}, {"n_paths", est.n_paths}};
}

}  // namespace

nlohmann::json default_config_json() {
    return json{
        {"command", "price"},
        {"model",
         {{"kappa", 1.5},
          {"theta", 0.04},
          {"sigma", 0.3},
          {"rho", -0.5},
          {"r", 0.05},
          {"delta", 0.02}}},
        {"instrument",
         {{"strike", 100.0}, {"maturity", 1.0}, {"spot", 100.0}, {"y0", 0.04}}},
        {"grid",
         {{"nx", 161},
          {"ny", 81},
          {"nt", 100},
          {"y_grading", "uniform"},
          {"scheme", "implicit_euler"},
          {"rannacher_steps", 2}}},
        {"penalty",
         {{"epsilon_rel", 1e-4},
          {"newton_tol_rel", 1e-9},
          {"max_newton_iterations", 50}}},
        {"mc",
         {{"paths", 100000},
          {"steps", 100},
          {"dates", 50},
          {"seed", 20260815},
          {"basis_degree", 2}}},
        {"converge", {{"levels", 3}}},
        {"output_dir", "out"},
        {"threads", 1}};
}

RunConfig parse_run_config(const nlohmann::json& j) {
    expect_object(j, "top level");
    check_keys(j,
               {"command", "model", "instrument", "grid", "penalty", "mc",
                "converge", "output_dir", "threads"},
               "top level");

    RunConfig cfg;
    cfg.command = get_str(j, "command", "price", "top level");
    bool known = false;
    for (const char* c : kCommands)
        if (cfg.command == c) known = true;
    if (!known) throw ConfigError("config: unknown command \"" + cfg.command + "\"");

    const json model = j.value("model", json::object());
    expect_object(model, "model");
    check_keys(model, {"kappa", "theta", "sigma", "rho", "r", "delta"}, "model");
    HestonParams& p = cfg.inputs.params;
    p.kappa = get_num(model, "kappa", 1.5, "model");
    p.theta = get_num(model, "theta", 0.04, "model");
    p.sigma = get_num(model, "sigma", 0.3, "model");
    p.rho = get_num(model, "rho", -0.5, "model");
    p.r = get_num(model, "r", 0.05, "model");
    p.delta = get_num(model, "delta", 0.02, "model");

    const json inst = j.value("instrument", json::object());
    expect_object(inst, "instrument");
    check_keys(inst, {"strike", "maturity", "spot", "y0"}, "instrument");
    cfg.inputs.spec.strike = get_num(inst, "strike", 100.0, "instrument");
    cfg.inputs.spec.maturity = get_num(inst, "maturity", 1.0, "instrument");
    cfg.inputs.spot = get_num(inst, "spot", 100.0, "instrument");
    cfg.inputs.y0 = get_num(inst, "y0", 0.04, "instrument");

    const json grid = j.value("grid", json::object());
    expect_object(grid, "grid");
    check_keys(grid,
               {"nx", "ny", "nt", "x_half_width", "y_max", "y_grading", "scheme",
                "rannacher_steps"},
               "grid");
    cfg.grid_given = j.contains("grid");
    cfg.nx = static_cast<int>(get_int(grid, "nx", 161, "grid"));
    cfg.ny = static_cast<int>(get_int(grid, "ny", 81, "grid"));
    cfg.nt = static_cast<int>(get_int(grid, "nt", 100, "grid"));
    if (grid.contains("x_half_width"))
        cfg.x_half_width = get_num(grid, "x_half_width", 0.0, "grid");
    if (grid.contains("y_max")) cfg.y_max = get_num(grid, "y_max", 0.0, "grid");
    const std::string grading = get_str(grid, "y_grading", "uniform", "grid");
    if (grading == "uniform")
        cfg.grading = YGrading::Uniform;
    else if (grading == "sqrt")
        cfg.grading = YGrading::Sqrt;
    else
        throw ConfigError("config: grid.y_grading must be uniform or sqrt");
    const std::string scheme = get_str(grid, "scheme", "implicit_euler", "grid");
    if (scheme == "implicit_euler")
        cfg.pde.scheme = TimeScheme::ImplicitEuler;
    else if (scheme == "crank_nicolson")
        cfg.pde.scheme = TimeScheme::CrankNicolson;
    else
        throw ConfigError("config: grid.scheme must be implicit_euler or crank_nicolson");
    cfg.pde.rannacher_steps =
        static_cast<int>(get_int(grid, "rannacher_steps", 2, "grid"));

    const json pen = j.value("penalty", json::object());
    expect_object(pen, "penalty");
    check_keys(pen, {"epsilon_rel", "newton_tol_rel", "max_newton_iterations"},
               "penalty");
    cfg.pde.penalty_epsilon_rel = get_num(pen, "epsilon_rel", 1e-4, "penalty");
    cfg.pde.newton_tol_rel = get_num(pen, "newton_tol_rel", 1e-9, "penalty");
    cfg.pde.max_newton_iterations =
        static_cast<int>(get_int(pen, "max_newton_iterations", 50, "penalty"));

    const json mc = j.value("mc", json::object());
    expect_object(mc, "mc");
    check_keys(mc, {"paths", "steps", "dates", "seed", "basis_degree"}, "mc");
    cfg.mc.paths = get_int(mc, "paths", 100000, "mc");
    cfg.mc.steps = static_cast<int>(get_int(mc, "steps", 100, "mc"));
    cfg.mc.dates = static_cast<int>(get_int(mc, "dates", 50, "mc"));
    cfg.mc.seed = static_cast<std::uint64_t>(get_int(mc, "seed", 20260815, "mc"));
    cfg.mc.basis_degree = static_cast<int>(get_int(mc, "basis_degree", 2, "mc"));

    const json conv = j.value("converge", json::object());
    expect_object(conv, "converge");
    check_keys(conv, {"levels"}, "converge");
    cfg.converge_levels = static_cast<int>(get_int(conv, "levels", 3, "converge"));
    if (cfg.converge_levels < 2)
        throw ConfigError("config: converge.levels must be >= 2");

    cfg.output_dir = get_str(j, "output_dir", "out", "top level");
    cfg.threads = static_cast<int>(get_int(j, "threads", 1, "top level"));
    if (cfg.threads < 0) throw ConfigError("config: threads must be >= 0");

    try {
        cfg.inputs.validate();
        cfg.pde.validate();
        cfg.mc.validate();
        if (cfg.nx < 2 || cfg.ny < 2 || cfg.nt < 2)
            throw std::invalid_argument("grid counts must be >= 2");
        if (cfg.x_half_width && *cfg.x_half_width <= 0.0)
            throw std::invalid_argument("grid.x_half_width must be positive");
        if (cfg.y_max && *cfg.y_max <= 0.0)
            throw std::invalid_argument("grid.y_max must be positive");
    } catch (const std::invalid_argument& err) {
        throw ConfigError(std::string("config: ") + err.what());
    }
    return cfg;
}

GridConfig resolve_grid(const RunConfig& config) {
    GridConfig g = default_grid_config(config.inputs, config.nx, config.ny, config.nt);
    if (config.x_half_width) {
        g.x_pad_left = *config.x_half_width;
        g.x_pad_right = *config.x_half_width;
    }
    if (config.y_max) g.y_max = *config.y_max;
    g.grading = config.grading;
    return g;
}

nlohmann::json config_echo(const RunConfig& cfg) {
    const GridConfig g = resolve_grid(cfg);
    json echo = default_config_json();
    echo["command"] = cfg.command;
    echo["model"] = {{"kappa", cfg.inputs.params.kappa},
                     {"theta", cfg.inputs.params.theta},
                     {"sigma", cfg.inputs.params.sigma},
                     {"rho", cfg.inputs.params.rho},
                     {"r", cfg.inputs.params.r},
                     {"delta", cfg.inputs.params.delta}};
    echo["instrument"] = {{"strike", cfg.inputs.spec.strike},
                          {"maturity", cfg.inputs.spec.maturity},
                          {"spot", cfg.inputs.spot},
                          {"y0", cfg.inputs.y0}};
    echo["grid"] = {{"nx", g.nx},
                    {"ny", g.ny},
                    {"nt", g.nt},
                    {"x_center", g.x_center},
                    {"x_pad_left", g.x_pad_left},
                    {"x_pad_right", g.x_pad_right},
                    {"y_max", g.y_max},
                    {"y_grading", g.grading == YGrading::Sqrt ? "sqrt" : "uniform"},
                    {"scheme", cfg.pde.scheme == TimeScheme::CrankNicolson
                                   ? "crank_nicolson"
                                   : "implicit_euler"},
                    {"rannacher_steps", cfg.pde.rannacher_steps}};
    echo["penalty"] = {{"epsilon_rel", cfg.pde.penalty_epsilon_rel},
                       {"newton_tol_rel", cfg.pde.newton_tol_rel},
                       {"max_newton_iterations", cfg.pde.max_newton_iterations}};
    echo["mc"] = {{"paths", cfg.mc.paths},
                  {"steps", cfg.mc.steps},
                  {"dates", cfg.mc.dates},
                  {"seed", cfg.mc.seed},
                  {"basis_degree", cfg.mc.basis_degree}};
    echo["converge"] = {{"levels", cfg.converge_levels}};
    echo["output_dir"] = cfg.output_dir;
    echo["threads"] = cfg.threads;
    return echo;
}

int run_command(const RunConfig& config, std::ostream& log) {
    const fs::path dir(config.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw ConfigError("cannot create output directory: " + dir.string());
    DirLock lock(dir);

    const json echo = config_echo(config);
    write_json_file((dir / "config_echo.json").string(), echo);
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    write_json_file(
        (dir / "run_meta.json").string(),
        json{{"command", config.command},
             {"unix_millis",
              std::chrono::duration_cast<std::chrono::milliseconds>(now).count()}});

    McConfig mc = config.mc;
    mc.threads = config.threads;
    const GridConfig grid = resolve_grid(config);
    const ProblemInputs& in = config.inputs;

    if (config.command == "price") {
        const Lattice lattice = build_lattice(grid);
        const PriceSurface am = solve_american(in.params, in.spec, lattice, config.pde);
        const PriceSurface eu = solve_european(in.params, in.spec, lattice, config.pde);
        write_text_file((dir / "surface_american.csv").string(), surface_to_csv(am));
        write_text_file((dir / "surface_european.csv").string(), surface_to_csv(eu));
        write_json_file((dir / "surface_american_meta.json").string(),
                        surface_sidecar(am));
        write_json_file((dir / "surface_european_meta.json").string(),
                        surface_sidecar(eu));
        const json result = {{"american", am.price_at(in.spot, in.y0)},
                             {"european", eu.price_at(in.spot, in.y0)},
                             {"spot", in.spot},
                             {"y0", in.y0}};
        write_json_file((dir / "result.json").string(), result);
        log << "american " << format_number(result["american"].get<double>())
            << "  european " << format_number(result["european"].get<double>())
            << "\n";
        return 0;
    }

    if (config.command == "boundary") {
        const Lattice lattice = build_lattice(grid);
        const PriceSurface am = solve_american(in.params, in.spec, lattice, config.pde);
        const ExerciseBoundary bd = extract_boundary(am);
        write_text_file((dir / "boundary.csv").string(), boundary_to_csv(bd));
        long unresolved = 0;
        double lo = bd.level.empty() ? 0.0 : bd.level[0], hi = lo;
        for (std::size_t i = 0; i < bd.level.size(); ++i) {
            lo = std::min(lo, bd.level[i]);
            hi = std::max(hi, bd.level[i]);
            if (!bd.resolved[i]) ++unresolved;
        }
        write_json_file((dir / "result.json").string(),
                        json{{"min_level", lo},
                             {"max_level", hi},
                             {"unresolved_nodes", unresolved},
                             {"tol", bd.tol}});
        log << "boundary levels in [" << format_number(lo) << ", "
            << format_number(hi) << "], unresolved " << unresolved << "\n";
        return 0;
    }

    if (config.command == "eep") {
        const Lattice lattice = build_lattice(grid);
        const PriceSurface am = solve_american(in.params, in.spec, lattice, config.pde);
        const PriceSurface eu = solve_european(in.params, in.spec, lattice, config.pde);
        const ExerciseBoundary bd = extract_boundary(am);
        const PremiumEstimate est =
            eep_premium(in.params, in.spec, in.spot, in.y0, am, eu, bd, mc);
        const json result = premium_to_json(est);
        write_json_file((dir / "result.json").string(), result);
        append_mc_log(dir, json{{"kind", "eep"}, {"estimate", result},
                                {"config", echo}});
        log << "premium " << format_number(est.premium) << " (se "
            << format_number(est.se) << "), residual "
            << format_number(est.residual) << "\n";
        return 0;
    }

    if (config.command == "symmetry") {
        const ReportEntry entry = check_symmetry(in, grid, config.pde, mc);
        const json result = entry.to_json();
        write_json_file((dir / "result.json").string(), result);
        append_mc_log(dir, json{{"kind", "symmetry"}, {"estimate", result},
                                {"config", echo}});
        log << "symmetry gap " << format_number(entry.measured) << " vs "
            << format_number(entry.threshold) << ": " << to_string(entry.status)
            << "\n";
        return entry.passed() ? 0 : 1;
    }

    if (config.command == "converge") {
        GridConfig base = grid;
        if (!config.grid_given)
            base = default_grid_config(in, 81, 41, 50);  // keeps level 3 affordable
        const ConvergenceTable table =
            run_convergence(in, base, config.pde, config.converge_levels,
                            config.threads);
        write_text_file((dir / "convergence.csv").string(), table.to_csv());
        json levels = json::array();
        for (const ConvergenceLevel& l : table.levels)
            levels.push_back({{"nx", l.nx},
                              {"ny", l.ny},
                              {"nt", l.nt},
                              {"american", l.american},
                              {"european", l.european},
                              {"change", l.change},
                              {"ratio", l.ratio},
                              {"smooth_fit_gap", l.smooth_fit_gap},
                              {"monotonicity_violation", l.monotonicity_violation},
                              {"census_fraction", l.census_fraction}});
        write_json_file((dir / "result.json").string(),
                        json{{"levels", levels},
                             {"census_nonincreasing",
                              table.census.fraction_nonincreasing}});
        log << table.to_csv();
        return 0;
    }

    // verify
    const VerificationArtifacts art =
        run_verification(in, grid, config.pde, mc, config.threads);
    write_json_file((dir / "report.json").string(), art.report.to_json());
    write_text_file((dir / "report.txt").string(), art.report.to_table());
    write_json_file((dir / "result.json").string(),
                    json{{"overall", art.report.overall() ? "pass" : "fail"},
                         {"american", art.american.price_at(in.spot, in.y0)},
                         {"european", art.european.price_at(in.spot, in.y0)},
                         {"premium", premium_to_json(art.premium)}});
    append_mc_log(dir, json{{"kind", "verify"},
                            {"estimate", premium_to_json(art.premium)},
                            {"config", echo}});
    log << art.report.to_table();
    return art.report.overall() ? 0 : 1;
}

}  // namespace heston
