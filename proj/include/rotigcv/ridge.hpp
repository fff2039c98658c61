#ifndef ROTIGCV_RIDGE_HPP
#define ROTIGCV_RIDGE_HPP

#include <span>
#include <utility>
#include <vector>

#include "rotigcv/spectra.hpp"

namespace rotigcv {

struct RidgeFit {
    double lambda = 0.0;
    Vector beta_hat;
    double residual_sq_norm = 0.0;  ///< ||y - X beta_hat||^2
    double smoother_trace = 0.0;    ///< Tr(S_lambda)
};

/**
 * Ridge solutions along a regularization path for one (design, response) pair.
 *
 * Holds the rotated response Q y so that every lambda costs O(min(n, p))
 * for scalar summaries and O(p * min(n, p)) for the coefficient vector.
 * lambda = 0 is the minimum-norm interpolator.
 */
class RidgePath {
public:
    RidgePath(const SpectralDecomposition& spec, const Eigen::Ref<const Vector>& y)
        : spec_(&spec), qy_(spec.rotate_response(y)) {}

    const SpectralDecomposition& spec() const noexcept { return *spec_; }
    const Vector& rotated_response() const noexcept { return qy_; }

    /// O beta_hat: the estimate expressed in the right singular frame.
    Vector rotated_coefficients(double lambda) const {
        check(lambda);
        const Vector& s = spec_->singular_values();
        Vector c = Vector::Zero(static_cast<Eigen::Index>(spec_->p()));
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            if (s(i) > 0.0) c(i) = s(i) / (s(i) * s(i) + lambda) * qy_(i);
        }
        return c;
    }

    Vector coefficients(double lambda) const {
        return spec_->right_frame().transpose() * rotated_coefficients(lambda);
    }

    /// ||y - X beta_hat||^2 via y^T (I - S)^2 y in the rotated frame.
    double residual_sq_norm(double lambda) const {
        check(lambda);
        const Vector& s2 = spec_->singular_sq();
        double acc = 0.0;
        for (Eigen::Index i = 0; i < qy_.size(); ++i) {
            double shrink = 1.0;
            if (i < s2.size() && s2(i) > 0.0) shrink = lambda / (s2(i) + lambda);
            acc += shrink * shrink * qy_(i) * qy_(i);
        }
        return acc;
    }

    /// Normalized training error (1/n) ||y - X beta_hat||^2.
    double training_error(double lambda) const {
        return residual_sq_norm(lambda) / static_cast<double>(spec_->n());
    }

    /// y - X beta_hat in the original sample coordinates.
    Vector residuals(double lambda) const {
        check(lambda);
        const Vector& s2 = spec_->singular_sq();
        Vector r = qy_;
        for (Eigen::Index i = 0; i < s2.size(); ++i) {
            if (s2(i) > 0.0) r(i) *= lambda / (s2(i) + lambda);
        }
        return spec_->left_frame().transpose() * r;
    }

    RidgeFit fit(double lambda) const {
        RidgeFit f;
        f.lambda = lambda;
        f.beta_hat = coefficients(lambda);
        f.residual_sq_norm = residual_sq_norm(lambda);
        f.smoother_trace = lambda > 0.0 ? trace_smoother(*spec_, lambda)
                                        : static_cast<double>(spec_->rank());
        return f;
    }

private:
    static void check(double lambda) {
        if (!(lambda >= 0.0)) {
            throw DomainError("ridge: lambda must be >= 0, got " + std::to_string(lambda));
        }
    }

    const SpectralDecomposition* spec_;
    Vector qy_;
};

inline RidgeFit ridge_fit(const SpectralDecomposition& spec, const Eigen::Ref<const Vector>& y,
                          double lambda) {
    return RidgePath(spec, y).fit(lambda);
}

/// Diagonal of the smoother S_lambda = X (X^T X + lambda I)^{-1} X^T.
inline Vector hat_diagonal(const SpectralDecomposition& spec, double lambda) {
    detail::require_positive_lambda(lambda, "hat_diagonal");
    const Vector& s2 = spec.singular_sq();
    const Matrix& q = spec.left_frame();
    Vector h = Vector::Zero(static_cast<Eigen::Index>(spec.n()));
    for (Eigen::Index k = 0; k < s2.size(); ++k) {
        if (s2(k) <= 0.0) continue;
        const double w = s2(k) / (s2(k) + lambda);
        h += w * q.row(k).transpose().cwiseAbs2();
    }
    return h;
}

/// (lambda, (1/n) ||y - X beta_hat_lambda||^2) for every grid point.
inline std::vector<std::pair<double, double>> training_error_curve(
    const SpectralDecomposition& spec, const Eigen::Ref<const Vector>& y,
    std::span<const double> lambdas) {
    if (lambdas.empty()) throw ArgumentError("training_error_curve: empty lambda grid");
    RidgePath path(spec, y);
    std::vector<std::pair<double, double>> out;
    out.reserve(lambdas.size());
    for (double l : lambdas) {
        detail::require_positive_lambda(l, "training_error_curve");
        out.emplace_back(l, path.training_error(l));
    }
    return out;
}

}  // namespace rotigcv

#endif  // ROTIGCV_RIDGE_HPP
