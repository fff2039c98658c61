#ifndef ROTIGCV_BASELINES_HPP
#define ROTIGCV_BASELINES_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rotigcv/ridge.hpp"
#include "rotigcv/spectra.hpp"

namespace rotigcv {

/// Generalized cross-validation: (1/n)||y - X beta_hat||^2 / (1 - Tr(S)/n)^2.
inline double gcv_metric(const RidgePath& path, double lambda) {
    const auto& spec = path.spec();
    const double denom = 1.0 - trace_smoother(spec, lambda) / static_cast<double>(spec.n());
    if (!(denom > 1e-12)) {
        throw DivergenceError("gcv_metric: Tr(S_lambda) >= n at lambda=" + std::to_string(lambda));
    }
    return path.training_error(lambda) / (denom * denom);
}

inline double gcv_metric(const SpectralDecomposition& spec, const Eigen::Ref<const Vector>& y,
                         double lambda) {
    return gcv_metric(RidgePath(spec, y), lambda);
}

/// Almost-sure limit of GCV for given (r2, sigma2):
/// [r2 (v - lambda v') + sigma2 gamma v'] / (gamma v^2).
///
/// Writing the denominator as (lambda v)^2 and the numerator as the explicit
/// training-error sums gives the same value: the lambda^2 factors cancel.
inline double gcv_asymptotic(const SpectralDecomposition& spec, double r2, double sigma2,
                             double lambda) {
    const auto tv = eval_transforms(spec, lambda);
    const double g = spec.gamma();
    return (r2 * (tv.v - lambda * tv.v_prime) + sigma2 * g * tv.v_prime) / (g * tv.v * tv.v);
}

/// The same limit written as the ratio of the explicit training-error sums to
/// the squared denominator (lambda v)^2.
inline double gcv_asymptotic_sums(const SpectralDecomposition& spec, double r2, double sigma2,
                                  double lambda) {
    const auto tv = eval_transforms(spec, lambda);
    const double l2 = lambda * lambda;
    const double num = r2 * l2 / spec.gamma() * (tv.v - lambda * tv.v_prime) + sigma2 * l2 * tv.v_prime;
    return num / ((lambda * tv.v) * (lambda * tv.v));
}

inline constexpr double kLeverageTolerance = 1e-12;

/// Leave-one-out CV through the hat-matrix shortcut
/// (1/n) sum ((y_i - yhat_i) / (1 - S_ii))^2.
inline double loocv_metric(const RidgePath& path, double lambda) {
    const auto& spec = path.spec();
    const Vector h = hat_diagonal(spec, lambda);
    const Vector r = path.residuals(lambda);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < h.size(); ++i) {
        const double denom = 1.0 - h(i);
        if (!(denom > kLeverageTolerance)) {
            throw DivergenceError("loocv_metric: leverage of sample " + std::to_string(i) +
                                  " is 1 at lambda=" + std::to_string(lambda));
        }
        const double e = r(i) / denom;
        acc += e * e;
    }
    return acc / static_cast<double>(h.size());
}

inline double loocv_metric(const SpectralDecomposition& spec, const Eigen::Ref<const Vector>& y,
                           double lambda) {
    return loocv_metric(RidgePath(spec, y), lambda);
}

/// Seeded uniformly random assignment of n samples to k folds of (near) equal size.
inline std::vector<std::vector<Eigen::Index>> kfold_partition(std::size_t n, std::size_t k,
                                                             std::uint64_t seed) {
    if (k < 2 || k > n) {
        throw ArgumentError("kfold: k must satisfy 2 <= k <= n (k=" + std::to_string(k) +
                            ", n=" + std::to_string(n) + ")");
    }
    std::vector<Eigen::Index> perm(n);
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<Eigen::Index>> folds(k);
    for (std::size_t j = 0; j < n; ++j) folds[j % k].push_back(perm[j]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

/// k-fold validation MSE (mean over folds) for every lambda in `lambdas`.
/// One thin SVD per fold is shared by the whole grid.
inline std::vector<double> kfold_curve(const Eigen::Ref<const Matrix>& x,
                                       const Eigen::Ref<const Vector>& y,
                                       std::span<const double> lambdas, std::size_t k,
                                       std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (static_cast<std::size_t>(y.size()) != n) throw ArgumentError("kfold: y/X size mismatch");
    for (double l : lambdas) detail::require_positive_lambda(l, "kfold");
    const auto folds = kfold_partition(n, k, seed);

    std::vector<double> curve(lambdas.size(), 0.0);
    std::vector<char> held(n);
    for (const auto& fold : folds) {
        std::fill(held.begin(), held.end(), 0);
        for (auto i : fold) held[static_cast<std::size_t>(i)] = 1;
        const auto n_train = static_cast<Eigen::Index>(n - fold.size());
        Matrix xt(n_train, x.cols());
        Vector yt(n_train);
        Eigen::Index r = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (held[i]) continue;
            xt.row(r) = x.row(static_cast<Eigen::Index>(i));
            yt(r) = y(static_cast<Eigen::Index>(i));
            ++r;
        }
        Matrix xv(static_cast<Eigen::Index>(fold.size()), x.cols());
        Vector yv(static_cast<Eigen::Index>(fold.size()));
        for (std::size_t j = 0; j < fold.size(); ++j) {
            xv.row(static_cast<Eigen::Index>(j)) = x.row(fold[j]);
            yv(static_cast<Eigen::Index>(j)) = y(fold[j]);
        }

        Eigen::BDCSVD<Matrix> svd(xt, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.info() != Eigen::Success) throw BackendError("kfold: SVD failed on a fold");
        const Vector uy = svd.matrixU().transpose() * yt;
        const Matrix xv_v = xv * svd.matrixV();
        const Vector& s = svd.singularValues();
        for (std::size_t li = 0; li < lambdas.size(); ++li) {
            const double l = lambdas[li];
            const Vector c = (s.array() / (s.array().square() + l) * uy.array()).matrix();
            const Vector resid = yv - xv_v * c;
            curve[li] += resid.squaredNorm() / static_cast<double>(fold.size());
        }
    }
    for (auto& c : curve) c /= static_cast<double>(folds.size());
    return curve;
}

inline double kfold_metric(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y,
                           double lambda, std::size_t k, std::uint64_t seed) {
    const double grid[] = {lambda};
    return kfold_curve(x, y, grid, k, seed).front();
}

}  // namespace rotigcv

#endif  // ROTIGCV_BASELINES_HPP
