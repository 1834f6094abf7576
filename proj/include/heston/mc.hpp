#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "heston/model.hpp"

namespace heston {

struct McConfig {
    long paths = 100000;
    int steps = 100;        // simulation intervals; times has steps+1 nodes
    int dates = 50;         // default early-exercise dates, must divide steps
    std::uint64_t seed = 20260815ULL;
    std::uint64_t stream_offset = 0;
    int threads = 1;        // 0 means hardware concurrency
    int basis_degree = 2;

    void validate() const;
};

/// Simulated paths on a uniform time grid, path-major storage.
/// `scheme` records which discretisation produced the batch; the y >= 0
/// invariant holds for "full_truncation" batches only, smoothed batches
/// keep their raw (possibly negative) variance by design.
struct PathBatch {
    std::vector<double> times;
    long n_paths = 0;
    std::vector<double> x;  // log-spot, empty for variance-only batches
    std::vector<double> y;
    std::uint64_t seed = 0;
    std::uint64_t stream_offset = 0;
    std::string scheme;
    int smoothing_n = 0;

    int n_times() const { return static_cast<int>(times.size()); }
    double x_at(long p, int i) const { return x[p * times.size() + i]; }
    double y_at(long p, int i) const { return y[p * times.size() + i]; }
};

/// Smooth, strictly positive volatility proxy f_n with 1/n <= f_n < n,
/// f_n nondecreasing, and f_n^2 one-Lipschitz uniformly in n.  For y up
/// to order n^2 the squared proxy tracks y^+ within sq_tolerance(),
/// which vanishes as n grows, so smoothed dynamics converge to the
/// truncated ones on compact ranges.
struct SmoothingFamily {
    int n = 1;

    double value(double y) const;  // f_n(y)
    double sq(double y) const;     // f_n(y)^2
    double sq_tolerance() const;   // sup_y |f_n(y)^2 - max(y, 0)|
};

SmoothingFamily make_smoothing(int n);  // rejects n < 1

/// Variance-only batch under full-truncation Euler.
PathBatch simulate_cir(const HestonParams& p, double y0, double t_max,
                       const McConfig& config);

/// Joint (log-spot, variance) batch under full-truncation Euler.  Both
/// Gaussian draws per step come from the path's own stream in fixed
/// order, so batches with equal (seed, stream_offset) are pathwise
/// coupled across schemes and path counts.
PathBatch simulate_heston(const HestonParams& p, double spot, double y0,
                          double t_max, const McConfig& config);

/// Same driving noise as simulate_heston but with the smoothed proxy
/// f_n in both equations and no truncation of the variance.
PathBatch simulate_smoothed(const HestonParams& p, double spot, double y0,
                            double t_max, int n, const McConfig& config);

/// Mean over paths of the pathwise sup-distance to a reference batch,
/// for the spot and variance components separately.
struct SupDistance {
    double x = 0.0;
    double y = 0.0;
};
SupDistance sup_distance(const PathBatch& a, const PathBatch& b);

struct PriceEstimate {
    double value = 0.0;
    double se = 0.0;
    long n_paths = 0;
};

enum class PayoffKind { Put, Call };

/// Plain European price by simulation.
PriceEstimate european_mc_price(const HestonParams& p, const PutSpec& spec,
                                double spot, double y0, const McConfig& config,
                                PayoffKind kind = PayoffKind::Put);

/// CSV export, columns path,t,x,y (x column omitted for variance-only
/// batches).
std::string batch_to_csv(const PathBatch& batch);

struct LsmcResult {
    double value = 0.0;
    double se = 0.0;
    long n_regression = 0;
    long n_valuation = 0;
    std::vector<double> exercise_dates;
};

/// Least-squares Monte Carlo price for a Bermudan put (or call) on the
/// given exercise dates; empty optional means the default uniform set
/// from config.dates.  The policy is fitted on one batch and applied to
/// an independent valuation batch, which also provides the standard
/// error.  All dates must lie on the simulation grid; the last date is
/// the final exercise opportunity.
LsmcResult lsmc_price(const HestonParams& p, const PutSpec& spec, double spot,
                      double y0, const McConfig& config,
                      const std::optional<std::vector<double>>& dates = {},
                      PayoffKind kind = PayoffKind::Put);

/// Same pricer on externally supplied batches (regression and valuation
/// must share the time grid).  Exposed so coupled smoothed batches can
/// be priced under the identical policy machinery.
LsmcResult lsmc_price_batches(const HestonParams& p, const PutSpec& spec,
                              const PathBatch& regression,
                              const PathBatch& valuation,
                              const std::vector<int>& date_indices,
                              int basis_degree, PayoffKind kind);

}  // namespace heston
