#include "heston/surface.hpp"

#include <cmath>

#include "heston/io.hpp"

namespace heston {

double PriceSurface::value(int i, double x, double y) const {
    Bracket bx = bracket(lattice.x, x);
    Bracket by = bracket(lattice.y, y);
    double v00 = at(i, bx.i, by.i);
    double v01 = at(i, bx.i, by.i + 1);
    double v10 = at(i, bx.i + 1, by.i);
    double v11 = at(i, bx.i + 1, by.i + 1);
    return (1.0 - bx.w) * ((1.0 - by.w) * v00 + by.w * v01) +
           bx.w * ((1.0 - by.w) * v10 + by.w * v11);
}

double PriceSurface::price_at(double spot, double y) const {
    return value(0, std::log(spot), y);
}

std::string surface_to_csv(const PriceSurface& s) {
    std::string out = "t,x,y,value\n";
    const auto& lat = s.lattice;
    for (int i = 0; i < lat.nt(); ++i)
        for (int j = 0; j < lat.nx(); ++j)
            for (int k = 0; k < lat.ny(); ++k)
                out += csv_line({format_number(lat.t[i]), format_number(lat.x[j]),
                                 format_number(lat.y[k]), format_number(s.at(i, j, k))});
    return out;
}

nlohmann::json diagnostics_to_json(const SolveDiagnostics& d) {
    return nlohmann::json{
        {"newton_iterations_total", d.newton_iterations_total},
        {"newton_iterations_max", d.newton_iterations_max},
        {"final_penalty_residual", d.final_penalty_residual},
        {"max_penalty_residual", d.max_penalty_residual},
        {"penalty_epsilon", d.penalty_epsilon},
        {"min_excess_over_payoff", d.min_excess_over_payoff},
        {"max_linear_residual", d.max_linear_residual},
        {"min_value", d.min_value},
        {"m_matrix_ok", d.m_matrix_ok},
        {"worst_offdiagonal", d.worst_offdiagonal},
        {"linear_solver_fallbacks", d.linear_solver_fallbacks},
    };
}

nlohmann::json surface_sidecar(const PriceSurface& s) {
    const auto& lat = s.lattice;
    return nlohmann::json{
        {"kind", s.kind == SurfaceKind::American ? "american" : "european"},
        {"nt", lat.nt()},
        {"nx", lat.nx()},
        {"ny", lat.ny()},
        {"t_max", lat.t.back()},
        {"x_min", lat.x.front()},
        {"x_max", lat.x.back()},
        {"y_max", lat.y.back()},
        {"y_grading", lat.config.grading == YGrading::Sqrt ? "sqrt" : "uniform"},
        {"diagnostics", diagnostics_to_json(s.diagnostics)},
    };
}

}  // namespace heston
