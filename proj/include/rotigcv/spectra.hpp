#ifndef ROTIGCV_SPECTRA_HPP
#define ROTIGCV_SPECTRA_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "rotigcv/errors.hpp"

namespace rotigcv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative threshold below which a singular value is treated as exactly zero.
inline constexpr double kZeroSingularRel = 1e-10;

class SpectralDecomposition;
inline SpectralDecomposition svd_decompose(const Eigen::Ref<const Matrix>& x);

/**
 * SVD view X = Q^T D O of an n x p design.
 *
 * Q is n x n, O is p x p, and the rows of O are the right singular vectors
 * o_i. `singular_values()` has length min(n, p), is nonincreasing, and has
 * entries below 1e-10 * s_max clamped to zero. Immutable once built.
 */
class SpectralDecomposition {
public:
    SpectralDecomposition() = default;

    /// Assemble from precomputed factors. Used for spectrally re-expressed
    /// models (see aligned::reduce_model); no SVD is run.
    static SpectralDecomposition from_parts(Vector singular_values, Matrix left_frame,
                                            Matrix right_frame) {
        const auto n = left_frame.rows();
        const auto p = right_frame.rows();
        if (left_frame.cols() != n || right_frame.cols() != p) {
            throw ArgumentError("from_parts: frames must be square");
        }
        if (singular_values.size() != std::min(n, p)) {
            throw ArgumentError("from_parts: expected min(n,p) singular values");
        }
        for (Eigen::Index i = 1; i < singular_values.size(); ++i) {
            if (singular_values(i) > singular_values(i - 1) || singular_values(i) < 0.0) {
                throw ArgumentError("from_parts: singular values must be nonnegative and nonincreasing");
            }
        }
        SpectralDecomposition s;
        s.n_ = static_cast<std::size_t>(n);
        s.p_ = static_cast<std::size_t>(p);
        s.s_ = std::move(singular_values);
        s.q_ = std::move(left_frame);
        s.o_ = std::move(right_frame);
        s.finalize();
        return s;
    }

    std::size_t n() const noexcept { return n_; }
    std::size_t p() const noexcept { return p_; }
    std::size_t rank_bound() const noexcept { return std::min(n_, p_); }
    double gamma() const noexcept { return static_cast<double>(p_) / static_cast<double>(n_); }

    const Vector& singular_values() const noexcept { return s_; }
    /// Squared singular values, i.e. the nonzero-padded eigenvalues of X^T X.
    const Vector& singular_sq() const noexcept { return s2_; }
    const Matrix& left_frame() const noexcept { return q_; }
    const Matrix& right_frame() const noexcept { return o_; }

    /// Number of nonzero singular values (the index set N is [0, rank)).
    std::size_t rank() const noexcept { return rank_; }

    /// Q y, the response rotated into the left singular frame.
    Vector rotate_response(const Eigen::Ref<const Vector>& y) const {
        if (static_cast<std::size_t>(y.size()) != n_) {
            throw ArgumentError("rotate_response: y has length " + std::to_string(y.size()) +
                                ", expected " + std::to_string(n_));
        }
        return q_ * y;
    }

    /// Q^T D O.
    Matrix reconstruct() const {
        Matrix d = Matrix::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(p_));
        for (Eigen::Index i = 0; i < s_.size(); ++i) d(i, i) = s_(i);
        return q_.transpose() * d * o_;
    }

private:
    friend SpectralDecomposition svd_decompose(const Eigen::Ref<const Matrix>& x);

    void finalize() {
        if (s_.size() > 0) {
            const double cut = kZeroSingularRel * s_.maxCoeff();
            for (Eigen::Index i = 0; i < s_.size(); ++i) {
                if (s_(i) < cut) s_(i) = 0.0;
            }
        }
        s2_ = s_.array().square().matrix();
        rank_ = 0;
        for (Eigen::Index i = 0; i < s_.size(); ++i) {
            if (s_(i) > 0.0) ++rank_;
        }
    }

    std::size_t n_ = 0;
    std::size_t p_ = 0;
    std::size_t rank_ = 0;
    Vector s_;
    Vector s2_;
    Matrix q_;
    Matrix o_;
};

/// Singular value decomposition with deterministic sign conventions: each
/// right singular vector has its largest-magnitude entry positive.
inline SpectralDecomposition svd_decompose(const Eigen::Ref<const Matrix>& x) {
    if (x.rows() < 1 || x.cols() < 1) {
        throw ArgumentError("svd_decompose: empty design");
    }
    if (!x.allFinite()) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            for (Eigen::Index i = 0; i < x.rows(); ++i) {
                if (!std::isfinite(x(i, j))) {
                    throw DegenerateInputError("svd_decompose: non-finite entry at (" +
                                               std::to_string(i) + ", " + std::to_string(j) + ")");
                }
            }
        }
    }
    Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.info() != Eigen::Success) {
        throw BackendError("svd_decompose: Eigen::BDCSVD failed to converge");
    }

    SpectralDecomposition out;
    out.n_ = static_cast<std::size_t>(x.rows());
    out.p_ = static_cast<std::size_t>(x.cols());
    out.s_ = svd.singularValues();
    out.q_ = svd.matrixU().transpose();
    out.o_ = svd.matrixV().transpose();

    const Eigen::Index k = out.s_.size();
    for (Eigen::Index i = 0; i < out.o_.rows(); ++i) {
        Eigen::Index arg = 0;
        out.o_.row(i).cwiseAbs().maxCoeff(&arg);
        if (out.o_(i, arg) < 0.0) {
            out.o_.row(i) *= -1.0;
            if (i < k) out.q_.row(i) *= -1.0;
        }
    }
    // Left vectors without a right partner (null space of X^T) get their own convention.
    for (Eigen::Index i = k; i < out.q_.rows(); ++i) {
        Eigen::Index arg = 0;
        out.q_.row(i).cwiseAbs().maxCoeff(&arg);
        if (out.q_(i, arg) < 0.0) out.q_.row(i) *= -1.0;
    }
    out.finalize();
    return out;
}

/// Nonzero-padded eigenvalues of X^T X (squared singular values), nonincreasing.
/// Values only; no frames are formed.
inline std::vector<double> gram_eigenvalues(const Eigen::Ref<const Matrix>& x) {
    if (x.rows() < 1 || x.cols() < 1) throw ArgumentError("gram_eigenvalues: empty design");
    if (!x.allFinite()) throw DegenerateInputError("gram_eigenvalues: non-finite entries");
    Eigen::BDCSVD<Matrix> svd(x);
    if (svd.info() != Eigen::Success) {
        throw BackendError("gram_eigenvalues: Eigen::BDCSVD failed to converge");
    }
    const Vector& s = svd.singularValues();
    std::vector<double> out(static_cast<std::size_t>(s.size()));
    for (Eigen::Index i = 0; i < s.size(); ++i) out[static_cast<std::size_t>(i)] = s(i) * s(i);
    return out;
}

/// Empirical Stieltjes transforms at z = -lambda.
struct TransformValues {
    double lambda = 0.0;
    double m = 0.0;        ///< m_D(-lambda), over the p eigenvalues of D^T D
    double m_prime = 0.0;  ///< d/dz m_D(z) at z = -lambda
    double v = 0.0;        ///< v_D(-lambda), over the n eigenvalues of D D^T
    double v_prime = 0.0;
};

namespace detail {

struct ResolventSums {
    double inv = 0.0;     // sum 1/(s^2+l)
    double inv_sq = 0.0;  // sum 1/(s^2+l)^2
};

inline ResolventSums resolvent_sums(const SpectralDecomposition& spec, double lambda) {
    ResolventSums r;
    const Vector& s2 = spec.singular_sq();
    for (Eigen::Index i = 0; i < s2.size(); ++i) {
        const double d = s2(i) + lambda;
        r.inv += 1.0 / d;
        r.inv_sq += 1.0 / (d * d);
    }
    return r;
}

}  // namespace detail

inline TransformValues eval_transforms(const SpectralDecomposition& spec, double lambda) {
    detail::require_positive_lambda(lambda, "eval_transforms");
    const auto sums = detail::resolvent_sums(spec, lambda);
    const double n = static_cast<double>(spec.n());
    const double p = static_cast<double>(spec.p());
    const double pad_p = spec.p() > spec.n() ? p - n : 0.0;
    const double pad_n = spec.n() > spec.p() ? n - p : 0.0;

    TransformValues t;
    t.lambda = lambda;
    t.m = (sums.inv + pad_p / lambda) / p;
    t.m_prime = (sums.inv_sq + pad_p / (lambda * lambda)) / p;
    t.v = (sums.inv + pad_n / lambda) / n;
    t.v_prime = (sums.inv_sq + pad_n / (lambda * lambda)) / n;
    return t;
}

/// Tr(S_lambda) = sum_i s_i^2 / (s_i^2 + lambda).
inline double trace_smoother(const SpectralDecomposition& spec, double lambda) {
    detail::require_positive_lambda(lambda, "trace_smoother");
    double tr = 0.0;
    const Vector& s2 = spec.singular_sq();
    for (Eigen::Index i = 0; i < s2.size(); ++i) tr += s2(i) / (s2(i) + lambda);
    return tr;
}

}  // namespace rotigcv

#endif  // ROTIGCV_SPECTRA_HPP
