#pragma once

#include <string>

#include <json.hpp>

namespace heston {

/// Parameters of the stochastic-volatility dynamics
///
///   dS_t / S_t = (r - delta) dt + sqrt(Y_t) dB_t
///   dY_t       = kappa (theta - Y_t) dt + sigma sqrt(Y_t) dW_t,
///
/// with d<B,W>_t = rho dt.  sigma = 0 is accepted and collapses the variance
/// to a deterministic path (used to cross-check against one-dimensional
/// oracles); r = 0 is accepted and flags a degenerate regime in which early
/// exercise of the put carries no benefit.
struct HestonParams {
    double kappa = 0.0;  ///< mean-reversion speed, > 0
    double theta = 0.0;  ///< long-run variance level, > 0
    double sigma = 0.0;  ///< volatility of variance, >= 0
    double rho = 0.0;    ///< spot/variance correlation, in (-1, 1)
    double r = 0.0;      ///< risk-free rate, >= 0
    double delta = 0.0;  ///< continuous dividend yield, >= 0

    /// Throws std::invalid_argument when any constraint fails.
    void validate() const;

    /// True when the deterministic-variance limit sigma = 0 is active.
    bool deterministic_variance() const { return sigma == 0.0; }

    /// True when r = 0, i.e. the regime where the American put degenerates
    /// to the European one.
    bool zero_rate() const { return r == 0.0; }
};

/// American put contract: strike and maturity (in years).
struct PutSpec {
    double strike = 0.0;    ///< > 0
    double maturity = 0.0;  ///< > 0

    void validate() const;
};

/// Coefficients of the pricing generator in log-spot coordinates
/// x = log s, acting on u(x, y):
///
///   L u = a_xx u_xx + 2 a_xy u_xy + a_yy u_yy + b_x u_x + b_y u_y + c u.
///
/// All second-order coefficients vanish at y = 0: the operator degenerates
/// on the variance axis and the quadratic form has determinant
/// (y^2 sigma^2 / 4)(1 - rho^2) >= 0.
struct GeneratorCoeffs {
    double a_xx = 0.0;  ///< y / 2
    double a_xy = 0.0;  ///< rho sigma y / 2
    double a_yy = 0.0;  ///< sigma^2 y / 2
    double b_x = 0.0;   ///< r - delta - y / 2
    double b_y = 0.0;   ///< kappa (theta - y)
    double c = 0.0;     ///< -r
};

/// Dual data produced by the put/call symmetry map.
struct SymmetryDual {
    HestonParams params;
    PutSpec spec;
    double spot = 0.0;
};

/// Full valuation problem: dynamics, contract, and initial state.
struct ProblemInputs {
    HestonParams params;
    PutSpec spec;
    double spot = 0.0;  ///< initial spot, > 0
    double y0 = 0.0;    ///< initial variance, >= 0

    void validate() const;
};

/// (K - s)^+ for s >= 0; negative spot is rejected.
double payoff_put(double strike, double s);

/// Non-strict Feller test 2 kappa theta >= sigma^2.
bool feller_satisfied(const HestonParams& p);

/// Generator coefficients at (x, y), y >= 0.  The coefficients do not
/// depend on x; the argument is kept so call sites read like the operator.
GeneratorCoeffs generator_coeffs(double x, double y, const HestonParams& p);

/// Put/call symmetry: the American call under (r, delta, rho, strike K,
/// spot s) prices as the American put under swapped rate/dividend, negated
/// correlation, and strike/spot exchanged.  The change of numeraire that
/// proves the relation also tilts the variance drift, so the dual runs a
/// CIR process with kappa' = kappa - rho sigma and theta' = kappa theta /
/// kappa'; the product kappa theta, and with it the Feller ratio, is
/// preserved.  Applying the map twice returns the original data.
/// Requires kappa > rho sigma so the dual mean reversion stays positive.
SymmetryDual symmetry_dual(const HestonParams& p, const PutSpec& spec, double spot);

/// Flat JSON round-trip for a full parameter set.  Keys: kappa, theta,
/// sigma, rho, r, delta, strike, maturity, spot, y0.  Unknown keys are an
/// error; so are missing ones.
nlohmann::json to_flat_json(const ProblemInputs& in);
ProblemInputs problem_from_flat_json(const nlohmann::json& j);

}  // namespace heston
