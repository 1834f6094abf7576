#include "heston/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace heston {

double Lattice::spot(int j) const { return std::exp(x[j]); }

Lattice build_lattice(const GridConfig& config) {
    if (config.nt < 2 || config.nx < 2 || config.ny < 2)
        throw std::invalid_argument("build_lattice: node counts must be >= 2");
    if (!(config.t_max > 0.0) || !std::isfinite(config.t_max))
        throw std::invalid_argument("build_lattice: t_max must be > 0");
    if (!(config.x_pad_left > 0.0) || !std::isfinite(config.x_pad_left) ||
        !(config.x_pad_right > 0.0) || !std::isfinite(config.x_pad_right) ||
        !std::isfinite(config.x_center))
        throw std::invalid_argument("build_lattice: bad x bounds");
    if (config.y_min != 0.0)
        throw std::invalid_argument("build_lattice: y_min must be 0 (degenerate row is required)");
    if (!(config.y_max > 0.0) || !std::isfinite(config.y_max))
        throw std::invalid_argument("build_lattice: y_max must be > 0");

    Lattice lat;
    lat.config = config;
    lat.t.resize(config.nt);
    lat.x.resize(config.nx);
    lat.y.resize(config.ny);
    for (int i = 0; i < config.nt; ++i)
        lat.t[i] = config.t_max * i / (config.nt - 1);
    lat.t.back() = config.t_max;
    const double x_span = config.x_pad_left + config.x_pad_right;
    for (int j = 0; j < config.nx; ++j)
        lat.x[j] = config.x_center - config.x_pad_left +
                   x_span * j / (config.nx - 1);
    for (int k = 0; k < config.ny; ++k) {
        double frac = static_cast<double>(k) / (config.ny - 1);
        lat.y[k] = config.grading == YGrading::Sqrt ? config.y_max * frac * frac
                                                    : config.y_max * frac;
    }
    lat.y[0] = 0.0;
    return lat;
}

GridConfig default_grid_config(const ProblemInputs& in, int nx, int ny, int nt) {
    in.validate();
    const double T = in.spec.maturity;
    const double base_var = std::max(in.params.theta, in.y0);
    GridConfig c;
    c.nx = nx;
    c.ny = ny;
    c.nt = nt;
    c.t_max = T;
    c.x_center = std::log(in.spec.strike);
    c.y_max = 3.0 * base_var;
    c.x_pad_left = std::max(4.0 * std::sqrt(base_var * T), 0.5);
    // The top variance row sees the widest diffusion; push the zero
    // far-field data 4.7 of its standard deviations out (drift included)
    // so truncation leaves no kink above the shape-check tolerances.
    const double top_sd = std::sqrt(c.y_max * T);
    const double drift = (0.5 * c.y_max + in.params.delta - in.params.r) * T;
    c.x_pad_right = std::max(c.x_pad_left, 4.7 * top_sd + std::max(0.0, drift));
    c.grading = YGrading::Uniform;
    return c;
}

GridConfig refine(const GridConfig& config) {
    GridConfig f = config;
    f.nt = 2 * config.nt - 1;
    f.nx = 2 * config.nx - 1;
    f.ny = 2 * config.ny - 1;
    return f;
}

void check_coverage(const Lattice& lattice, const HestonParams& p, const PutSpec& spec, double y0) {
    const double xk = std::log(spec.strike);
    const double need = 4.0 * std::sqrt(p.theta * spec.maturity);
    const double tol = 1e-12 * (1.0 + need);
    if (lattice.x.front() > xk - need + tol || lattice.x.back() < xk + need - tol)
        throw std::invalid_argument(
            "lattice does not cover log(strike) +- 4 sqrt(theta T) in log-spot");
    double y_need = 3.0 * (y0 >= 0.0 ? std::max(y0, p.theta) : p.theta);
    if (lattice.y.back() < y_need - 1e-12 * (1.0 + y_need))
        throw std::invalid_argument("lattice y_max is below 3 max(y0, theta)");
    if (std::abs(lattice.t.back() - spec.maturity) > 1e-12 * (1.0 + spec.maturity))
        throw std::invalid_argument("lattice horizon differs from contract maturity");
}

Bracket bracket(const std::vector<double>& grid, double v) {
    Bracket b;
    if (grid.size() < 2 || v <= grid.front()) return b;
    if (v >= grid.back()) {
        b.i = static_cast<int>(grid.size()) - 2;
        b.w = 1.0;
        return b;
    }
    auto it = std::upper_bound(grid.begin(), grid.end(), v);
    b.i = static_cast<int>(it - grid.begin()) - 1;
    b.w = (v - grid[b.i]) / (grid[b.i + 1] - grid[b.i]);
    return b;
}

}  // namespace heston
