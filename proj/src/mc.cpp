#include "heston/mc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "heston/io.hpp"
#include "heston/rng.hpp"

namespace heston {

std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 32) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

MeanSe mean_se(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("mean_se: empty sample");
    MeanSe out;
    const double n = static_cast<double>(v.size());
    out.mean = pairwise_sum(v) / n;
    if (v.size() == 1) return out;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = v[i] - out.mean;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / (n - 1.0);
    out.se = std::sqrt(var / n);
    return out;
}

void McConfig::validate() const {
    if (paths < 1) throw std::invalid_argument("mc: paths must be positive");
    if (steps < 1) throw std::invalid_argument("mc: steps must be positive");
    if (dates < 1) throw std::invalid_argument("mc: dates must be positive");
    if (steps % dates != 0)
        throw std::invalid_argument("mc: dates must divide steps");
    if (threads < 0) throw std::invalid_argument("mc: threads must be >= 0");
    if (basis_degree < 1 || basis_degree > 4)
        throw std::invalid_argument("mc: basis_degree must be in [1, 4]");
}

namespace {

// log(1 + e^t) without overflow for large |t|.
double softplus(double t) {
    if (t > 0.0) return t + std::log1p(std::exp(-t));
    return std::log1p(std::exp(t));
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(path_index) over [0, n) on the requested number of threads.
// Work is split by contiguous blocks; fn must write only to its own
// path's slots.
template <class Fn>
void for_each_path(long n, int threads, Fn fn) {
    const int nthreads = std::min<long>(resolve_threads(threads), n);
    if (nthreads <= 1) {
        for (long p = 0; p < n; ++p) fn(p);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    const long block = (n + nthreads - 1) / nthreads;
    for (int t = 0; t < nthreads; ++t) {
        const long lo = t * block;
        const long hi = std::min(n, lo + block);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (long p = lo; p < hi; ++p) fn(p);
        });
    }
    for (auto& th : pool) th.join();
}

std::vector<double> uniform_times(double t_max, int steps) {
    std::vector<double> t(steps + 1);
    for (int i = 0; i <= steps; ++i)
        t[i] = t_max * static_cast<double>(i) / static_cast<double>(steps);
    return t;
}

enum class Scheme { Truncated, Smoothed };

PathBatch simulate_impl(const HestonParams& p, double spot, double y0,
                        double t_max, const McConfig& config, Scheme scheme,
                        int smoothing_n, bool with_spot) {
    p.validate();
    config.validate();
    if (y0 < 0.0) throw std::invalid_argument("simulate: y0 must be >= 0");
    if (t_max <= 0.0) throw std::invalid_argument("simulate: t_max must be positive");
    if (with_spot && spot <= 0.0)
        throw std::invalid_argument("simulate: spot must be positive");

    PathBatch batch;
    batch.times = uniform_times(t_max, config.steps);
    batch.n_paths = config.paths;
    batch.seed = config.seed;
    batch.stream_offset = config.stream_offset;
    batch.scheme = scheme == Scheme::Truncated ? "full_truncation" : "smoothed_euler";
    batch.smoothing_n = scheme == Scheme::Smoothed ? smoothing_n : 0;

    const int m = batch.n_times();
    batch.y.resize(static_cast<std::size_t>(config.paths) * m);
    if (with_spot) batch.x.resize(static_cast<std::size_t>(config.paths) * m);

    const double dt = t_max / config.steps;
    const double sdt = std::sqrt(dt);
    const double rho_perp = std::sqrt(1.0 - p.rho * p.rho);
    const double x0 = with_spot ? std::log(spot) : 0.0;
    const SmoothingFamily fam =
        scheme == Scheme::Smoothed ? make_smoothing(smoothing_n) : SmoothingFamily{};

    for_each_path(config.paths, config.threads, [&](long path) {
        PathRng rng(config.seed, config.stream_offset + static_cast<std::uint64_t>(path));
        double* ypath = batch.y.data() + static_cast<std::size_t>(path) * m;
        double* xpath = with_spot ? batch.x.data() + static_cast<std::size_t>(path) * m
                                  : nullptr;
        double y = y0;
        double x = x0;
        ypath[0] = y;
        if (xpath) xpath[0] = x;
        for (int i = 1; i < m; ++i) {
            // Two draws per step in fixed order keeps batches coupled
            // across schemes and keeps variance-only batches aligned
            // with joint ones.
            const double zw = rng.gauss();
            const double zp = rng.gauss();
            const double dw = sdt * zw;
            const double db = p.rho * dw + rho_perp * sdt * zp;
            double vol, vsq;
            if (scheme == Scheme::Truncated) {
                vsq = y;  // stored value is already >= 0
                vol = std::sqrt(y);
            } else {
                vsq = fam.sq(y);
                vol = fam.value(y);
            }
            if (xpath) x += (p.r - p.delta - 0.5 * vsq) * dt + vol * db;
            y += p.kappa * (p.theta - vsq) * dt + p.sigma * vol * dw;
            if (scheme == Scheme::Truncated) y = std::max(y, 0.0);
            ypath[i] = y;
            if (xpath) xpath[i] = x;
        }
    });
    return batch;
}

}  // namespace

double SmoothingFamily::sq(double y) const {
    const double nn = static_cast<double>(n);
    const double a = 1.0 / (2.0 * nn);
    const double cap = nn * nn - 1.0 / (nn * nn);
    // Soft hinge clipped to [0, cap]; exact hinge recovered as n grows.
    const double c = a * (softplus(y / a) - softplus((y - cap) / a));
    return 1.0 / (nn * nn) + c;
}

double SmoothingFamily::value(double y) const { return std::sqrt(sq(y)); }

double SmoothingFamily::sq_tolerance() const {
    const double nn = static_cast<double>(n);
    return std::log(2.0) / nn + 1.0 / (nn * nn);
}

SmoothingFamily make_smoothing(int n) {
    if (n < 1) throw std::invalid_argument("smoothing index must be >= 1");
    return SmoothingFamily{n};
}

PathBatch simulate_cir(const HestonParams& p, double y0, double t_max,
                       const McConfig& config) {
    return simulate_impl(p, 1.0, y0, t_max, config, Scheme::Truncated, 0, false);
}

PathBatch simulate_heston(const HestonParams& p, double spot, double y0,
                          double t_max, const McConfig& config) {
    return simulate_impl(p, spot, y0, t_max, config, Scheme::Truncated, 0, true);
}

PathBatch simulate_smoothed(const HestonParams& p, double spot, double y0,
                            double t_max, int n, const McConfig& config) {
    make_smoothing(n);  // validate before simulating
    return simulate_impl(p, spot, y0, t_max, config, Scheme::Smoothed, n, true);
}

SupDistance sup_distance(const PathBatch& a, const PathBatch& b) {
    if (a.n_paths != b.n_paths || a.times != b.times)
        throw std::invalid_argument("sup_distance: batches must share shape");
    if (a.x.empty() != b.x.empty())
        throw std::invalid_argument("sup_distance: mixed batch kinds");
    const int m = a.n_times();
    std::vector<double> dx(a.n_paths), dy(a.n_paths);
    for (long p = 0; p < a.n_paths; ++p) {
        double mx = 0.0, my = 0.0;
        for (int i = 0; i < m; ++i) {
            if (!a.x.empty())
                mx = std::max(mx, std::abs(a.x_at(p, i) - b.x_at(p, i)));
            my = std::max(my, std::abs(a.y_at(p, i) - b.y_at(p, i)));
        }
        dx[p] = mx;
        dy[p] = my;
    }
    SupDistance out;
    out.x = a.x.empty() ? 0.0 : mean_se(dx).mean;
    out.y = mean_se(dy).mean;
    return out;
}

PriceEstimate european_mc_price(const HestonParams& p, const PutSpec& spec,
                                double spot, double y0, const McConfig& config,
                                PayoffKind kind) {
    spec.validate();
    const PathBatch batch = simulate_heston(p, spot, y0, spec.maturity, config);
    const int last = batch.n_times() - 1;
    const double disc = std::exp(-p.r * spec.maturity);
    std::vector<double> payoff(batch.n_paths);
    for (long path = 0; path < batch.n_paths; ++path) {
        const double s = std::exp(batch.x_at(path, last));
        const double intrinsic =
            kind == PayoffKind::Put ? spec.strike - s : s - spec.strike;
        payoff[path] = disc * std::max(intrinsic, 0.0);
    }
    const MeanSe ms = mean_se(payoff);
    return PriceEstimate{ms.mean, ms.se, batch.n_paths};
}

std::string batch_to_csv(const PathBatch& batch) {
    std::string out = batch.x.empty() ? "path,t,y\n" : "path,t,x,y\n";
    const int m = batch.n_times();
    for (long p = 0; p < batch.n_paths; ++p) {
        for (int i = 0; i < m; ++i) {
            out += std::to_string(p);
            out += ',';
            out += format_number(batch.times[i]);
            if (!batch.x.empty()) {
                out += ',';
                out += format_number(batch.x_at(p, i));
            }
            out += ',';
            out += format_number(batch.y_at(p, i));
            out += '\n';
        }
    }
    return out;
}

}  // namespace heston
