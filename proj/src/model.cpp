#include "heston/model.hpp"

#include <cmath>
#include <stdexcept>

namespace heston {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void HestonParams::validate() const {
    require(std::isfinite(kappa) && kappa > 0.0, "kappa must be > 0");
    require(std::isfinite(theta) && theta > 0.0, "theta must be > 0");
    require(std::isfinite(sigma) && sigma >= 0.0, "sigma must be >= 0");
    require(std::isfinite(rho) && rho > -1.0 && rho < 1.0, "rho must lie in (-1, 1)");
    require(std::isfinite(r) && r >= 0.0, "r must be >= 0");
    require(std::isfinite(delta) && delta >= 0.0, "delta must be >= 0");
}

void PutSpec::validate() const {
    require(std::isfinite(strike) && strike > 0.0, "strike must be > 0");
    require(std::isfinite(maturity) && maturity > 0.0, "maturity must be > 0");
}

void ProblemInputs::validate() const {
    params.validate();
    spec.validate();
    require(std::isfinite(spot) && spot > 0.0, "spot must be > 0");
    require(std::isfinite(y0) && y0 >= 0.0, "y0 must be >= 0");
}

double payoff_put(double strike, double s) {
    require(std::isfinite(s) && s >= 0.0, "payoff_put: spot must be >= 0");
    return std::max(strike - s, 0.0);
}

bool feller_satisfied(const HestonParams& p) {
    return 2.0 * p.kappa * p.theta >= p.sigma * p.sigma;
}

GeneratorCoeffs generator_coeffs(double /*x*/, double y, const HestonParams& p) {
    require(std::isfinite(y) && y >= 0.0, "generator_coeffs: y must be >= 0");
    GeneratorCoeffs g;
    g.a_xx = 0.5 * y;
    g.a_xy = 0.5 * p.rho * p.sigma * y;
    g.a_yy = 0.5 * p.sigma * p.sigma * y;
    g.b_x = p.r - p.delta - 0.5 * y;
    g.b_y = p.kappa * (p.theta - y);
    g.c = -p.r;
    return g;
}

SymmetryDual symmetry_dual(const HestonParams& p, const PutSpec& spec, double spot) {
    p.validate();
    spec.validate();
    require(std::isfinite(spot) && spot > 0.0, "symmetry_dual: spot must be > 0");
    require(p.kappa > p.rho * p.sigma,
            "symmetry_dual: needs kappa > rho*sigma for a valid dual CIR drift");
    SymmetryDual d;
    d.params = p;
    // Under the spot numeraire the variance keeps sigma and the product
    // kappa*theta but mean-reverts at kappa - rho*sigma.
    d.params.kappa = p.kappa - p.rho * p.sigma;
    d.params.theta = p.kappa * p.theta / d.params.kappa;
    d.params.r = p.delta;
    d.params.delta = p.r;
    d.params.rho = -p.rho;
    d.spec.strike = spot;
    d.spec.maturity = spec.maturity;
    d.spot = spec.strike;
    d.params.validate();
    return d;
}

nlohmann::json to_flat_json(const ProblemInputs& in) {
    return nlohmann::json{
        {"kappa", in.params.kappa}, {"theta", in.params.theta},
        {"sigma", in.params.sigma}, {"rho", in.params.rho},
        {"r", in.params.r},         {"delta", in.params.delta},
        {"strike", in.spec.strike}, {"maturity", in.spec.maturity},
        {"spot", in.spot},          {"y0", in.y0},
    };
}

ProblemInputs problem_from_flat_json(const nlohmann::json& j) {
    static const char* keys[] = {"kappa", "theta", "sigma",    "rho",  "r",
                                 "delta", "strike", "maturity", "spot", "y0"};
    if (!j.is_object()) throw std::invalid_argument("parameter set must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* k : keys) known = known || key == k;
        if (!known) throw std::invalid_argument("unknown parameter key: " + key);
        if (!value.is_number()) throw std::invalid_argument("parameter " + key + " must be a number");
    }
    for (const char* k : keys)
        if (!j.contains(k)) throw std::invalid_argument(std::string("missing parameter key: ") + k);

    ProblemInputs in;
    in.params.kappa = j.at("kappa").get<double>();
    in.params.theta = j.at("theta").get<double>();
    in.params.sigma = j.at("sigma").get<double>();
    in.params.rho = j.at("rho").get<double>();
    in.params.r = j.at("r").get<double>();
    in.params.delta = j.at("delta").get<double>();
    in.spec.strike = j.at("strike").get<double>();
    in.spec.maturity = j.at("maturity").get<double>();
    in.spot = j.at("spot").get<double>();
    in.y0 = j.at("y0").get<double>();
    in.validate();
    return in;
}

}  // namespace heston
