#pragma once

#include <cstddef>
#include <vector>

#include "heston/model.hpp"

namespace heston {

enum class YGrading { Uniform, Sqrt };

/// Node counts and bounds for the (t, x, y) lattice, x = log spot.
/// Counts are node counts (so nx = 2 means two x-levels).  The variance
/// axis always starts at y = 0; asking for a positive y_min is an error
/// because the degenerate boundary row is part of the scheme.
struct GridConfig {
    int nt = 100;
    int nx = 161;
    int ny = 81;
    double t_max = 1.0;
    double x_center = 0.0;
    /// Log-spot padding below / above x_center.  The right pad is wider by
    /// default because the zero far-field value is only accurate once the
    /// put is worthless at the top variance row.
    double x_pad_left = 1.0;
    double x_pad_right = 1.0;
    double y_min = 0.0;
    double y_max = 0.12;
    YGrading grading = YGrading::Uniform;
};

/// Tensor lattice with uniform t and x spacing.  y is uniform or
/// square-root graded (y_k = y_max (k / (ny-1))^2), ascending from 0.
struct Lattice {
    std::vector<double> t;  ///< ascending, t[0] = 0, uniform
    std::vector<double> x;  ///< ascending, uniform
    std::vector<double> y;  ///< ascending, y[0] = 0
    GridConfig config;

    int nt() const { return static_cast<int>(t.size()); }
    int nx() const { return static_cast<int>(x.size()); }
    int ny() const { return static_cast<int>(y.size()); }
    double dt() const { return t[1] - t[0]; }
    double dx() const { return x[1] - x[0]; }
    double spot(int j) const;
    /// Index of the (x_j, y_k) node within one time slice, x-major.
    std::size_t node(int j, int k) const { return static_cast<std::size_t>(j) * y.size() + k; }
};

Lattice build_lattice(const GridConfig& config);

/// Desk defaults: x centred at log strike.  Left pad
/// max(4 sqrt(max(theta, y0) T), 0.5); right pad additionally reaches
/// 4.7 standard deviations at the top variance row plus its drift so the
/// zero far-field data sits where the put is genuinely worthless;
/// y_max = 3 max(y0, theta).  The pad floor keeps short-dated
/// low-variance configs from collapsing onto the strike.
GridConfig default_grid_config(const ProblemInputs& in, int nx = 161, int ny = 81, int nt = 100);

/// Returns a config with every mesh halved (node counts 2n-1, same bounds).
GridConfig refine(const GridConfig& config);

/// Throws unless the lattice brackets the strike with at least
/// 4 sqrt(theta T) of log-spot on both sides and reaches y_max >=
/// 3 max(y0, theta).  Pass y0 < 0 to skip the initial-variance clause.
void check_coverage(const Lattice& lattice, const HestonParams& p, const PutSpec& spec, double y0);

/// Piecewise-linear bracket: i such that grid[i] <= v <= grid[i+1], plus
/// the weight of the right node.  Values outside the grid clamp to the ends.
struct Bracket {
    int i = 0;
    double w = 0.0;
};
Bracket bracket(const std::vector<double>& grid, double v);

}  // namespace heston
