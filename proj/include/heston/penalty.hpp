#pragma once

#include <vector>

namespace heston {

/// One member of the penalty family used to relax the obstacle constraint
/// u >= psi.  zeta is C^1, nondecreasing, concave, identically zero for
/// w >= epsilon, and reaches its floor -scale at w = 0:
///
///   zeta(w) = 0                        for w >= epsilon
///   zeta(w) = -scale ((w-eps)/eps)^2   for 0 <= w < epsilon
///   zeta(w) = -scale + (2 scale/eps) w for w < 0.
///
/// The quadratic branch is capped linearly below w = 0 so the derivative
/// stays bounded by 2 scale / epsilon.  `scale` is chosen by the solver to
/// match the largest obstacle source the generator produces on the payoff
/// (r K for the put), so the equilibrium u - psi lands inside [0, epsilon).
struct PenaltyFamily {
    double epsilon = 0.0;
    double scale = 0.0;

    double floor() const { return -scale; }
    double value(double w) const;
    double slope(double w) const;
};

/// Validates epsilon > 0, scale >= 0.
PenaltyFamily make_penalty(double epsilon, double scale);

/// zeta applied entrywise to u - psi.  Sizes must match.
std::vector<double> apply_penalty(const PenaltyFamily& family, const std::vector<double>& u,
                                  const std::vector<double>& psi);

}  // namespace heston
