#ifndef ROTIGCV_ROTI_GCV_HPP
#define ROTIGCV_ROTI_GCV_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rotigcv/ridge.hpp"
#include "rotigcv/spectra.hpp"

namespace rotigcv {

/// Coefficients of r^2 and sigma^2 in the expected normalized training error.
struct EstimatingCoefficients {
    double a = 0.0;
    double b = 0.0;
};

/// a = lambda^2 (1/p) sum s^2/(s^2+lambda)^2,
/// b = (1/n) [sum lambda^2/(s^2+lambda)^2 + max(n-p, 0)].
inline EstimatingCoefficients estimating_coefficients(const SpectralDecomposition& spec,
                                                      double lambda) {
    detail::require_positive_lambda(lambda, "estimating_coefficients");
    const Vector& s2 = spec.singular_sq();
    const double l2 = lambda * lambda;
    double sa = 0.0;
    double sb = 0.0;
    for (Eigen::Index i = 0; i < s2.size(); ++i) {
        const double d = s2(i) + lambda;
        sa += s2(i) / (d * d);
        sb += l2 / (d * d);
    }
    const double n = static_cast<double>(spec.n());
    const double p = static_cast<double>(spec.p());
    const double pad_n = spec.n() > spec.p() ? n - p : 0.0;
    return {l2 * sa / p, (sb + pad_n) / n};
}

struct EstimatingGridPoint {
    double lambda = 0.0;
    double a = 0.0;
    double b = 0.0;
    double t = 0.0;  ///< (1/n) ||y - X beta_hat_lambda||^2
};

struct SnrEstimate {
    double r2_hat = 0.0;
    double sigma2_hat = 0.0;
    std::vector<EstimatingGridPoint> grid;
    /// Relative spread (max - min) / mean of a_i/b_i across the grid.
    double condition_diag = 0.0;
    /// max_i |t_i - r2_hat a_i - sigma2_hat b_i|.
    double residual_diag = 0.0;

    bool negative() const noexcept { return r2_hat < 0.0 || sigma2_hat < 0.0; }
};

enum class SnrRegression {
    first_point,  ///< differences against the first grid point
    centered,     ///< ordinary mean-centered least squares
};

inline constexpr double kIdentifiabilitySpread = 1e-8;

namespace detail {

inline void require_grid(std::span<const double> grid, std::size_t min_size, const char* where) {
    if (grid.size() < min_size) {
        throw ArgumentError(std::string(where) + ": grid needs at least " +
                            std::to_string(min_size) + " points, got " +
                            std::to_string(grid.size()));
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        require_positive_lambda(grid[i], where);
        if (i > 0 && !(grid[i] > grid[i - 1])) {
            throw ArgumentError(std::string(where) + ": grid must be strictly increasing");
        }
    }
}

// Slope of (y_i - y_ref) on (x_i - x_ref) through the origin.
inline double anchored_slope(const std::vector<double>& y, const std::vector<double>& x,
                             double y_ref, double x_ref) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        num += (y[i] - y_ref) * (x[i] - x_ref);
        den += (x[i] - x_ref) * (x[i] - x_ref);
    }
    return num / den;
}

inline double mean(const std::vector<double>& v) {
    double acc = 0.0;
    for (double e : v) acc += e;
    return acc / static_cast<double>(v.size());
}

}  // namespace detail

/// Solve the grid of estimating equations t_i ~ r2 a_i + sigma2 b_i.
///
/// sigma2_hat is the slope of t/a on b/a and r2_hat the slope of t/b on a/b;
/// with `first_point` both regressions are anchored at the first grid point.
inline SnrEstimate solve_estimating_equations(std::vector<EstimatingGridPoint> grid,
                                              SnrRegression method = SnrRegression::first_point) {
    if (grid.size() < 2) {
        throw ArgumentError("estimate_snr: need at least 2 grid points, got " +
                            std::to_string(grid.size()));
    }
    const std::size_t L = grid.size();
    std::vector<double> t_a(L), b_a(L), t_b(L), a_b(L);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < L; ++i) {
        const auto& g = grid[i];
        if (!(g.a > 0.0) || !(g.b > 0.0)) {
            throw IdentifiabilityError(
                "estimate_snr: coefficient a or b is not positive (zero spectrum); only "
                "r2*a + sigma2*b is estimable");
        }
        t_a[i] = g.t / g.a;
        b_a[i] = g.b / g.a;
        t_b[i] = g.t / g.b;
        a_b[i] = g.a / g.b;
        lo = std::min(lo, a_b[i]);
        hi = std::max(hi, a_b[i]);
    }

    SnrEstimate est;
    est.condition_diag = (hi - lo) / detail::mean(a_b);
    if (!(est.condition_diag >= kIdentifiabilitySpread)) {
        throw IdentifiabilityError(
            "estimate_snr: ratios a_i/b_i are constant across the grid (spread " +
            std::to_string(est.condition_diag) +
            "); only r2*a + sigma2*b is estimable for this spectrum");
    }

    if (method == SnrRegression::first_point) {
        est.sigma2_hat = detail::anchored_slope(t_a, b_a, t_a[0], b_a[0]);
        est.r2_hat = detail::anchored_slope(t_b, a_b, t_b[0], a_b[0]);
    } else {
        est.sigma2_hat = detail::anchored_slope(t_a, b_a, detail::mean(t_a), detail::mean(b_a));
        est.r2_hat = detail::anchored_slope(t_b, a_b, detail::mean(t_b), detail::mean(a_b));
    }
    for (const auto& g : grid) {
        est.residual_diag =
            std::max(est.residual_diag, std::abs(g.t - est.r2_hat * g.a - est.sigma2_hat * g.b));
    }
    est.grid = std::move(grid);
    return est;
}

inline SnrEstimate estimate_snr(const RidgePath& path, std::span<const double> lambda_grid,
                                SnrRegression method = SnrRegression::first_point) {
    detail::require_grid(lambda_grid, 2, "estimate_snr");
    std::vector<EstimatingGridPoint> grid;
    grid.reserve(lambda_grid.size());
    for (double l : lambda_grid) {
        const auto c = estimating_coefficients(path.spec(), l);
        grid.push_back({l, c.a, c.b, path.training_error(l)});
    }
    return solve_estimating_equations(std::move(grid), method);
}

inline SnrEstimate estimate_snr(const SpectralDecomposition& spec,
                                const Eigen::Ref<const Vector>& y,
                                std::span<const double> lambda_grid,
                                SnrRegression method = SnrRegression::first_point) {
    return estimate_snr(RidgePath(spec, y), lambda_grid, method);
}

/// `count` log-spaced points in [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, std::size_t count) {
    if (!(lo > 0.0) || !(hi > lo) || count < 2) {
        throw ArgumentError("log_grid: need 0 < lo < hi and count >= 2");
    }
    std::vector<double> g(count);
    const double step = (std::log(hi) - std::log(lo)) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) {
        g[i] = std::exp(std::log(lo) + step * static_cast<double>(i));
    }
    g.front() = lo;
    g.back() = hi;
    return g;
}

/// 20 log-spaced points spanning [1e-2, 1e2] times the mean squared singular value.
inline std::vector<double> default_estimation_grid(const SpectralDecomposition& spec) {
    const double scale = spec.singular_sq().mean();
    if (!(scale > 0.0)) {
        throw IdentifiabilityError("default_estimation_grid: spectrum is identically zero");
    }
    return log_grid(1e-2 * scale, 1e2 * scale, 20);
}

/// Asymptotic out-of-sample risk
/// r2 (lambda^2/gamma v' + (gamma-1)/gamma) + sigma2 (v - lambda v').
inline double risk_functional(const SpectralDecomposition& spec, double r2, double sigma2,
                              double lambda) {
    const auto tv = eval_transforms(spec, lambda);
    const double g = spec.gamma();
    return r2 * (lambda * lambda / g * tv.v_prime + (g - 1.0) / g) +
           sigma2 * (tv.v - lambda * tv.v_prime);
}

/// Same quantity through the explicit sums
/// r2 lambda^2 m' + sigma2 (1/n) sum s^2/(s^2+lambda)^2.
inline double risk_functional_sums(const SpectralDecomposition& spec, double r2, double sigma2,
                                   double lambda) {
    const auto tv = eval_transforms(spec, lambda);
    const Vector& s2 = spec.singular_sq();
    double var = 0.0;
    for (Eigen::Index i = 0; i < s2.size(); ++i) {
        const double d = s2(i) + lambda;
        var += s2(i) / (d * d);
    }
    return r2 * lambda * lambda * tv.m_prime + sigma2 * var / static_cast<double>(spec.n());
}

/// ROTI-GCV risk curve for one dataset: the (r2, sigma2) estimate is computed
/// once and plugged into the risk functional at every lambda.
class RotiGcv {
public:
    RotiGcv(const RidgePath& path, std::span<const double> estimation_grid,
            SnrRegression method = SnrRegression::first_point)
        : spec_(&path.spec()), estimate_(estimate_snr(path, estimation_grid, method)) {}

    const SnrEstimate& estimate() const noexcept { return estimate_; }

    double operator()(double lambda) const {
        return risk_functional(*spec_, std::max(estimate_.r2_hat, 0.0),
                               std::max(estimate_.sigma2_hat, 0.0), lambda);
    }

private:
    const SpectralDecomposition* spec_;
    SnrEstimate estimate_;
};

inline double roti_gcv_metric(const SpectralDecomposition& spec, const Eigen::Ref<const Vector>& y,
                              double lambda, std::span<const double> estimation_grid) {
    RidgePath path(spec, y);
    return RotiGcv(path, estimation_grid)(lambda);
}

struct TuneResult {
    double lambda_star = 0.0;
    double metric_min = 0.0;
    std::size_t index = 0;
};

/// Grid minimizer of `metric`; ties go to the larger lambda.
inline TuneResult tune_lambda(const std::function<double(double)>& metric,
                              std::span<const double> search_grid) {
    detail::require_grid(search_grid, 1, "tune_lambda");
    TuneResult best;
    best.metric_min = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t i = 0; i < search_grid.size(); ++i) {
        const double l = search_grid[i];
        double value = 0.0;
        try {
            value = metric(l);
        } catch (const Error& e) {
            throw Error(e.kind(), "tune_lambda: metric failed at lambda=" + std::to_string(l) +
                                      ": " + e.what());
        }
        if (std::isnan(value)) {
            throw DomainError("tune_lambda: metric is NaN at lambda=" + std::to_string(l));
        }
        if (!found || value <= best.metric_min) {
            best = {l, value, i};
            found = true;
        }
    }
    return best;
}

}  // namespace rotigcv

#endif  // ROTIGCV_ROTI_GCV_HPP
