#pragma once

#include <functional>

namespace heston {

/// Reference prices for the deterministic-variance limit sigma = 0, where
/// Y_t = theta + (y0 - theta) e^{-kappa t} is a known function of time and
/// the spot is lognormal.  These routines share no code with the lattice or
/// Monte Carlo engines; they exist to cross-check them.

/// Integrated variance of the deterministic path over [0, t].
double deterministic_integrated_variance(double kappa, double theta, double y0, double t);

/// European put on a lognormal terminal spot with total log-variance
/// `total_variance`, priced by Gauss-Legendre quadrature against the
/// standard normal density.
double lognormal_put_quadrature(double strike, double maturity, double r, double delta,
                                double spot, double total_variance);

/// American put under a deterministic instantaneous variance schedule
/// v(t) >= 0, priced on a recombining binomial tree built in variance time:
/// every step carries the same log-variance, so time steps stretch where
/// v(t) is small.  `integrated_variance(t)` must be nondecreasing with
/// integrated_variance(0) = 0.
double binomial_american_put(double strike, double maturity, double r, double delta,
                             double spot,
                             const std::function<double(double)>& integrated_variance,
                             int steps);

/// Same tree without early exercise; used to sanity-check the tree against
/// the quadrature price.
double binomial_european_put(double strike, double maturity, double r, double delta,
                             double spot,
                             const std::function<double(double)>& integrated_variance,
                             int steps);

}  // namespace heston
