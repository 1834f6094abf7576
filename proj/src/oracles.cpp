#include "heston/oracles.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace heston {

namespace {

// Gauss-Legendre nodes and weights on [a, b] by Newton iteration on the
// Legendre recurrence.
void gauss_legendre(double a, double b, int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    const int m = (n + 1) / 2;
    const double xm = 0.5 * (b + a);
    const double xl = 0.5 * (b - a);
    for (int i = 0; i < m; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        x[i] = xm - xl * z;
        x[n - 1 - i] = xm + xl * z;
        w[i] = 2.0 * xl / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

struct Tree {
    double strike, maturity, r, delta, spot;
    const std::function<double(double)>* var;
    int steps;
};

// Inverts integrated_variance(t) = target on [lo, maturity] by bisection.
double invert_variance_time(const Tree& t, double target, double lo) {
    double hi = t.maturity;
    double flo = (*t.var)(lo) - target;
    if (flo > 1e-14 * (1.0 + target)) throw std::invalid_argument("integrated variance not nondecreasing");
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if ((*t.var)(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double binomial_put(const Tree& t, bool american) {
    const int n = t.steps;
    const double total = (*t.var)(t.maturity);
    if (total <= 0.0) {
        // No diffusion at all: the spot is a deterministic exponential.
        double best = 0.0;
        const int m = american ? n : 0;
        for (int k = 0; k <= m; ++k) {
            double tk = t.maturity * k / std::max(1, n);
            double s = t.spot * std::exp((t.r - t.delta) * tk);
            best = std::max(best, std::exp(-t.r * tk) * std::max(t.strike - s, 0.0));
        }
        double sT = t.spot * std::exp((t.r - t.delta) * t.maturity);
        double european = std::exp(-t.r * t.maturity) * std::max(t.strike - sT, 0.0);
        return american ? std::max(best, european) : european;
    }

    const double h = total / n;           // per-step log-variance
    const double dxs = std::sqrt(h);      // log-space move
    std::vector<double> times(n + 1);
    times[0] = 0.0;
    for (int k = 1; k <= n; ++k) times[k] = invert_variance_time(t, k * h, times[k - 1]);
    times[n] = t.maturity;

    std::vector<double> disc(n), pu(n);
    const double u = std::exp(dxs), d = std::exp(-dxs);
    for (int k = 0; k < n; ++k) {
        double dt = times[k + 1] - times[k];
        double g = std::exp((t.r - t.delta) * dt);
        double p = (g - d) / (u - d);
        if (!(p > 0.0 && p < 1.0))
            throw std::invalid_argument("binomial step probability outside (0,1); increase steps");
        pu[k] = p;
        disc[k] = std::exp(-t.r * dt);
    }

    std::vector<double> v(n + 1);
    for (int j = 0; j <= n; ++j) {
        double s = t.spot * std::exp((2.0 * j - n) * dxs);
        v[j] = std::max(t.strike - s, 0.0);
    }
    for (int k = n - 1; k >= 0; --k) {
        for (int j = 0; j <= k; ++j) {
            double cont = disc[k] * (pu[k] * v[j + 1] + (1.0 - pu[k]) * v[j]);
            if (american) {
                double s = t.spot * std::exp((2.0 * j - k) * dxs);
                cont = std::max(cont, t.strike - s);
            }
            v[j] = cont;
        }
    }
    return v[0];
}

}  // namespace

double deterministic_integrated_variance(double kappa, double theta, double y0, double t) {
    return theta * t + (y0 - theta) * (1.0 - std::exp(-kappa * t)) / kappa;
}

double lognormal_put_quadrature(double strike, double maturity, double r, double delta,
                                double spot, double total_variance) {
    if (!(strike > 0.0 && spot > 0.0 && maturity >= 0.0 && total_variance >= 0.0))
        throw std::invalid_argument("lognormal_put_quadrature: bad inputs");
    const double fwd = spot * std::exp((r - delta) * maturity);
    const double df = std::exp(-r * maturity);
    if (total_variance <= 1e-16) return df * std::max(strike - fwd, 0.0);

    const double sd = std::sqrt(total_variance);
    // Payoff is nonzero only below z* where K = fwd exp(-V/2 + sd z).
    const double zstar = (std::log(strike / fwd) + 0.5 * total_variance) / sd;
    const double zlo = -14.0;
    const double zhi = std::min(zstar, 14.0);
    if (zhi <= zlo) return 0.0;

    std::vector<double> x, w;
    gauss_legendre(zlo, zhi, 192, x, w);
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        double s = fwd * std::exp(-0.5 * total_variance + sd * x[i]);
        acc += w[i] * (strike - s) * normal_pdf(x[i]);
    }
    return df * std::max(acc, 0.0);
}

double binomial_american_put(double strike, double maturity, double r, double delta,
                             double spot,
                             const std::function<double(double)>& integrated_variance,
                             int steps) {
    if (steps < 1) throw std::invalid_argument("binomial_american_put: steps must be >= 1");
    Tree t{strike, maturity, r, delta, spot, &integrated_variance, steps};
    return binomial_put(t, true);
}

double binomial_european_put(double strike, double maturity, double r, double delta,
                             double spot,
                             const std::function<double(double)>& integrated_variance,
                             int steps) {
    if (steps < 1) throw std::invalid_argument("binomial_european_put: steps must be >= 1");
    Tree t{strike, maturity, r, delta, spot, &integrated_variance, steps};
    return binomial_put(t, false);
}

}  // namespace heston
