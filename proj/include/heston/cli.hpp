#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "heston/lattice.hpp"
#include "heston/mc.hpp"
#include "heston/model.hpp"
#include "heston/pde.hpp"

namespace heston {

/// Configuration problems (bad schema, invalid values, unwritable
/// output directory) map to process exit code 2.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string command = "price";
    ProblemInputs inputs;
    int nx = 161, ny = 81, nt = 100;
    std::optional<double> x_half_width;
    std::optional<double> y_max;
    YGrading grading = YGrading::Uniform;
    bool grid_given = false;
    PdeConfig pde;
    McConfig mc;
    int converge_levels = 3;
    std::string output_dir = "out";
    int threads = 1;
};

/// Fully resolved default configuration (the desk setup) as JSON.
nlohmann::json default_config_json();

/// Strict parse: unknown keys, wrong types, or invalid values throw
/// ConfigError.  Absent keys take the desk defaults.
RunConfig parse_run_config(const nlohmann::json& j);

/// Resolved grid for the run (desk defaults plus any explicit
/// overrides).
GridConfig resolve_grid(const RunConfig& config);

/// Echo of the fully resolved configuration, written next to every
/// run's outputs.
nlohmann::json config_echo(const RunConfig& config);

/// Executes the configured command, writing artifacts into the output
/// directory.  Returns the process exit code: 0 on success, 1 when a
/// verification-style command fails its comparison.  Solver and config
/// problems surface as exceptions for the caller to map to codes 3 and
/// 2.
int run_command(const RunConfig& config, std::ostream& log);

}  // namespace heston
