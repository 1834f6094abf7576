#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "heston/mc.hpp"
#include "heston/rng.hpp"

namespace heston {

namespace {

// Valuation paths live in a far-away stream block so enlarging either
// batch never makes them overlap.
constexpr std::uint64_t kValuationStreamBase = 1ULL << 63;

double intrinsic_value(PayoffKind kind, double strike, double s) {
    return kind == PayoffKind::Put ? strike - s : s - strike;
}

struct Basis {
    int degree = 2;
    double s_scale = 1.0;
    double y_scale = 1.0;

    int size() const { return (degree + 1) * (degree + 2) / 2; }

    void eval(double s, double y, double* out) const {
        const double su = s / s_scale;
        const double yu = y / y_scale;
        int idx = 0;
        for (int total = 0; total <= degree; ++total)
            for (int a = total; a >= 0; --a)
                out[idx++] = std::pow(su, a) * std::pow(yu, total - a);
    }
};

// Fitted continuation model at one exercise date.  Columns that were
// constant over the regression sample are dropped before the solve;
// `trained == false` means no in-the-money paths were available and the
// policy continues unconditionally.
struct DateModel {
    bool trained = false;
    std::vector<int> kept;
    Eigen::VectorXd coef;

    double predict(const double* features) const {
        double acc = 0.0;
        for (std::size_t c = 0; c < kept.size(); ++c)
            acc += coef[static_cast<Eigen::Index>(c)] * features[kept[c]];
        return acc;
    }
};

DateModel fit_continuation(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    DateModel model;
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        const double lo = X.col(c).minCoeff();
        const double hi = X.col(c).maxCoeff();
        if (c == 0 || hi - lo > 1e-12 * (1.0 + std::abs(lo) + std::abs(hi)))
            model.kept.push_back(static_cast<int>(c));
    }
    Eigen::MatrixXd Xk(X.rows(), static_cast<Eigen::Index>(model.kept.size()));
    for (std::size_t c = 0; c < model.kept.size(); ++c)
        Xk.col(static_cast<Eigen::Index>(c)) = X.col(model.kept[c]);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xk);
    if (qr.rank() < Xk.cols())
        throw std::runtime_error(
            "lsmc: regression matrix is rank deficient; reduce the basis degree");
    model.coef = qr.solve(y);
    model.trained = true;
    return model;
}

std::vector<int> default_date_indices(const McConfig& config) {
    const int stride = config.steps / config.dates;
    std::vector<int> idx(config.dates);
    for (int j = 0; j < config.dates; ++j) idx[j] = (j + 1) * stride;
    return idx;
}

std::vector<int> indices_from_dates(const std::vector<double>& dates,
                                    const std::vector<double>& times) {
    if (dates.empty())
        throw std::invalid_argument("lsmc: exercise date list is empty");
    const double t_max = times.back();
    const int steps = static_cast<int>(times.size()) - 1;
    std::vector<int> idx;
    idx.reserve(dates.size());
    double prev = -1.0;
    for (double d : dates) {
        if (!(d >= 0.0) || d > t_max + 1e-12)
            throw std::invalid_argument("lsmc: exercise date outside [0, maturity]");
        if (d <= prev)
            throw std::invalid_argument("lsmc: exercise dates must be strictly increasing");
        prev = d;
        const int i = static_cast<int>(std::lround(d / t_max * steps));
        const int clamped = std::clamp(i, 0, steps);
        if (std::abs(times[clamped] - d) > 1e-9 * std::max(1.0, t_max))
            throw std::invalid_argument(
                "lsmc: exercise dates must lie on the simulation time grid");
        idx.push_back(clamped);
    }
    return idx;
}

}  // namespace

LsmcResult lsmc_price_batches(const HestonParams& p, const PutSpec& spec,
                              const PathBatch& regression,
                              const PathBatch& valuation,
                              const std::vector<int>& date_indices,
                              int basis_degree, PayoffKind kind) {
    p.validate();
    spec.validate();
    if (regression.x.empty() || valuation.x.empty())
        throw std::invalid_argument("lsmc: batches must carry spot paths");
    if (regression.times != valuation.times)
        throw std::invalid_argument("lsmc: batches must share the time grid");
    if (date_indices.empty())
        throw std::invalid_argument("lsmc: no exercise dates");
    for (std::size_t j = 0; j < date_indices.size(); ++j) {
        if (date_indices[j] < 0 || date_indices[j] >= regression.n_times())
            throw std::invalid_argument("lsmc: exercise index outside the grid");
        if (j > 0 && date_indices[j] <= date_indices[j - 1])
            throw std::invalid_argument("lsmc: exercise indices must increase");
    }

    const std::vector<double>& times = regression.times;
    const int ndates = static_cast<int>(date_indices.size());
    const int last = date_indices[ndates - 1];

    Basis basis;
    basis.degree = basis_degree;
    basis.s_scale = spec.strike;
    basis.y_scale = std::max({p.theta, regression.y_at(0, 0), 1e-8});
    const int nf = basis.size();
    std::vector<double> feat(nf);

    // Backward induction over the regression batch: per-path cash flow
    // and its exercise time under the policy fitted so far.
    const long nr = regression.n_paths;
    std::vector<double> cash(nr), tau(nr);
    for (long path = 0; path < nr; ++path) {
        const double s = std::exp(regression.x_at(path, last));
        cash[path] = std::max(intrinsic_value(kind, spec.strike, s), 0.0);
        tau[path] = times[last];
    }

    std::vector<DateModel> models(ndates);  // models[ndates-1] stays untrained
    for (int j = ndates - 2; j >= 0; --j) {
        const int i = date_indices[j];
        const double t = times[i];
        std::vector<long> itm;
        for (long path = 0; path < nr; ++path) {
            const double s = std::exp(regression.x_at(path, i));
            if (intrinsic_value(kind, spec.strike, s) > 0.0) itm.push_back(path);
        }
        if (itm.empty()) continue;

        Eigen::MatrixXd X(static_cast<Eigen::Index>(itm.size()), nf);
        Eigen::VectorXd target(static_cast<Eigen::Index>(itm.size()));
        for (std::size_t row = 0; row < itm.size(); ++row) {
            const long path = itm[row];
            const double s = std::exp(regression.x_at(path, i));
            basis.eval(s, regression.y_at(path, i), feat.data());
            for (int c = 0; c < nf; ++c)
                X(static_cast<Eigen::Index>(row), c) = feat[c];
            target[static_cast<Eigen::Index>(row)] =
                cash[path] * std::exp(-p.r * (tau[path] - t));
        }
        models[j] = fit_continuation(X, target);

        for (const long path : itm) {
            const double s = std::exp(regression.x_at(path, i));
            const double exercise = intrinsic_value(kind, spec.strike, s);
            basis.eval(s, regression.y_at(path, i), feat.data());
            if (exercise >= models[j].predict(feat.data())) {
                cash[path] = exercise;
                tau[path] = t;
            }
        }
    }

    // Apply the frozen policy to the valuation batch; its spread is the
    // reported uncertainty.
    const long nv = valuation.n_paths;
    std::vector<double> value(nv, 0.0);
    for (long path = 0; path < nv; ++path) {
        for (int j = 0; j < ndates; ++j) {
            const int i = date_indices[j];
            const double s = std::exp(valuation.x_at(path, i));
            const double exercise = intrinsic_value(kind, spec.strike, s);
            if (exercise <= 0.0) continue;
            if (j + 1 == ndates) {
                value[path] = std::exp(-p.r * times[i]) * exercise;
                break;
            }
            if (!models[j].trained) continue;
            basis.eval(s, valuation.y_at(path, i), feat.data());
            if (exercise >= models[j].predict(feat.data())) {
                value[path] = std::exp(-p.r * times[i]) * exercise;
                break;
            }
        }
    }

    const MeanSe ms = mean_se(value);
    LsmcResult out;
    out.value = ms.mean;
    out.se = ms.se;
    out.n_regression = nr;
    out.n_valuation = nv;
    out.exercise_dates.reserve(date_indices.size());
    for (int i : date_indices) out.exercise_dates.push_back(times[i]);
    return out;
}

LsmcResult lsmc_price(const HestonParams& p, const PutSpec& spec, double spot,
                      double y0, const McConfig& config,
                      const std::optional<std::vector<double>>& dates,
                      PayoffKind kind) {
    config.validate();
    const PathBatch regression =
        simulate_heston(p, spot, y0, spec.maturity, config);
    McConfig vconf = config;
    vconf.stream_offset = config.stream_offset + kValuationStreamBase;
    const PathBatch valuation =
        simulate_heston(p, spot, y0, spec.maturity, vconf);
    const std::vector<int> idx = dates
        ? indices_from_dates(*dates, regression.times)
        : default_date_indices(config);
    return lsmc_price_batches(p, spec, regression, valuation, idx,
                              config.basis_degree, kind);
}

}  // namespace heston
