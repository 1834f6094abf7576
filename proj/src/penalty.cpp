#include "heston/penalty.hpp"

#include <cmath>
#include <stdexcept>

namespace heston {

double PenaltyFamily::value(double w) const {
    if (w >= epsilon) return 0.0;
    if (w >= 0.0) {
        double q = (w - epsilon) / epsilon;
        return -scale * q * q;
    }
    return -scale + (2.0 * scale / epsilon) * w;
}

double PenaltyFamily::slope(double w) const {
    if (w >= epsilon) return 0.0;
    if (w >= 0.0) return -2.0 * scale * (w - epsilon) / (epsilon * epsilon);
    return 2.0 * scale / epsilon;
}

PenaltyFamily make_penalty(double epsilon, double scale) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw std::invalid_argument("penalty epsilon must be > 0");
    if (!(scale >= 0.0) || !std::isfinite(scale))
        throw std::invalid_argument("penalty scale must be >= 0");
    return PenaltyFamily{epsilon, scale};
}

std::vector<double> apply_penalty(const PenaltyFamily& family, const std::vector<double>& u,
                                  const std::vector<double>& psi) {
    if (u.size() != psi.size())
        throw std::invalid_argument("apply_penalty: size mismatch between values and obstacle");
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = family.value(u[i] - psi[i]);
    return out;
}

}  // namespace heston
