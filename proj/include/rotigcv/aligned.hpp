#ifndef ROTIGCV_ALIGNED_HPP
#define ROTIGCV_ALIGNED_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rotigcv/ridge.hpp"
#include "rotigcv/roti_gcv.hpp"
#include "rotigcv/spectra.hpp"

namespace rotigcv {

/**
 * Distinguished right singular directions of a training design.
 *
 * Indices are 0-based ranks into the nonincreasing singular values and must
 * lie in N = [0, rank). `alpha[i]` is the coefficient of sqrt(n) o_i in the
 * signal; `spike_levels[i]` is the expected test-Gram level along a coupled
 * direction and `bulk_level` the average level over the remaining directions.
 */
struct AlignmentSpec {
    std::vector<std::size_t> aligned;
    std::vector<std::size_t> coupled;
    std::map<std::size_t, double> alpha;
    std::map<std::size_t, double> spike_levels;
    double bulk_level = 1.0;
};

struct AlignedRisk {
    double bias = 0.0;
    double variance = 0.0;
    double total = 0.0;
};

namespace detail {

inline void require_in_range(std::span<const std::size_t> idx, std::size_t rank,
                             const char* where) {
    for (auto i : idx) {
        if (i >= rank) {
            throw ArgumentError(std::string(where) + ": index " + std::to_string(i) +
                                " is outside the nonzero singular values (rank " +
                                std::to_string(rank) + ")");
        }
    }
}

inline bool contains(const std::vector<std::size_t>& v, std::size_t i) {
    return std::find(v.begin(), v.end(), i) != v.end();
}

}  // namespace detail

/// Bias and variance of ridge under signal-PC alignment and train/test coupling.
inline AlignedRisk aligned_risk(const SpectralDecomposition& spec, double r2, double sigma2,
                                const AlignmentSpec& alignment, double lambda) {
    detail::require_positive_lambda(lambda, "aligned_risk");
    detail::require_in_range(alignment.aligned, spec.rank(), "aligned_risk");
    detail::require_in_range(alignment.coupled, spec.rank(), "aligned_risk");
    if (!(alignment.bulk_level > 0.0)) throw ArgumentError("aligned_risk: bulk_level must be > 0");

    const double n = static_cast<double>(spec.n());
    const double bulk = alignment.bulk_level;
    const double r2_per_dir = r2 / spec.gamma();
    const Vector& s2 = spec.singular_sq();

    auto level = [&](std::size_t i) {
        if (!detail::contains(alignment.coupled, i)) return bulk;
        auto it = alignment.spike_levels.find(i);
        if (it == alignment.spike_levels.end()) {
            throw ArgumentError("aligned_risk: missing spike level for coupled index " +
                                std::to_string(i));
        }
        if (!(it->second > 0.0)) throw ArgumentError("aligned_risk: spike levels must be > 0");
        return it->second;
    };

    // Directions without a distinguished role all contribute with s^2 = 0 or
    // the bulk level, so they are summed in closed form below.
    double bias = 0.0;
    double var = 0.0;
    for (Eigen::Index k = 0; k < s2.size(); ++k) {
        const auto i = static_cast<std::size_t>(k);
        const double d = s2(k) + lambda;
        double mass = r2_per_dir;
        if (detail::contains(alignment.aligned, i)) {
            auto it = alignment.alpha.find(i);
            if (it == alignment.alpha.end()) {
                throw ArgumentError("aligned_risk: missing alpha for aligned index " +
                                    std::to_string(i));
            }
            mass += n * it->second * it->second;
        }
        const double lv = level(i);
        bias += mass * lv / (d * d);
        var += s2(k) * lv / (d * d);
    }
    const double null_dirs = static_cast<double>(spec.p()) - static_cast<double>(s2.size());
    bias += null_dirs * r2_per_dir * bulk / (lambda * lambda);

    AlignedRisk out;
    out.bias = lambda * lambda / n * bias;
    out.variance = sigma2 / n * var;
    out.total = out.bias + out.variance;
    return out;
}

/// Principal-components estimate of the aligned coefficients.
struct AlphaEstimate {
    std::vector<std::size_t> indices;
    std::vector<double> raw;    ///< (Qy)_i / s_i, estimates sqrt(n) alpha_i
    std::vector<double> alpha;  ///< raw / sqrt(n), estimates alpha_i

    std::map<std::size_t, double> as_map() const {
        std::map<std::size_t, double> m;
        for (std::size_t k = 0; k < indices.size(); ++k) m[indices[k]] = alpha[k];
        return m;
    }
};

inline AlphaEstimate estimate_alpha(const RidgePath& path, std::span<const std::size_t> aligned) {
    const auto& spec = path.spec();
    if (aligned.empty()) return {};
    detail::require_in_range(aligned, spec.rank(), "estimate_alpha");
    AlphaEstimate est;
    const double sqrt_n = std::sqrt(static_cast<double>(spec.n()));
    for (auto i : aligned) {
        const auto k = static_cast<Eigen::Index>(i);
        const double raw = path.rotated_response()(k) / spec.singular_values()(k);
        est.indices.push_back(i);
        est.raw.push_back(raw);
        est.alpha.push_back(raw / sqrt_n);
    }
    return est;
}

/// Literal PCR route: X_proj = X O_J^T, alpha_raw = (X_proj^T X_proj)^{-1} X_proj^T y.
inline AlphaEstimate estimate_alpha_normal_equations(const Eigen::Ref<const Matrix>& x,
                                                     const Eigen::Ref<const Vector>& y,
                                                     std::span<const std::size_t> aligned,
                                                     const Eigen::Ref<const Matrix>& right_frame) {
    if (aligned.empty()) return {};
    Matrix o_j(static_cast<Eigen::Index>(aligned.size()), right_frame.cols());
    for (std::size_t k = 0; k < aligned.size(); ++k) {
        if (aligned[k] >= static_cast<std::size_t>(right_frame.rows())) {
            throw ArgumentError("estimate_alpha: index out of range");
        }
        o_j.row(static_cast<Eigen::Index>(k)) = right_frame.row(static_cast<Eigen::Index>(aligned[k]));
    }
    const Matrix x_proj = x * o_j.transpose();
    const Matrix gram = x_proj.transpose() * x_proj;
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14) {
        throw ArgumentError("estimate_alpha: projected design is rank deficient");
    }
    const Vector raw = ldlt.solve(x_proj.transpose() * y);
    AlphaEstimate est;
    const double sqrt_n = std::sqrt(static_cast<double>(x.rows()));
    for (std::size_t k = 0; k < aligned.size(); ++k) {
        est.indices.push_back(aligned[k]);
        est.raw.push_back(raw(static_cast<Eigen::Index>(k)));
        est.alpha.push_back(raw(static_cast<Eigen::Index>(k)) / sqrt_n);
    }
    return est;
}

/// Model with the aligned directions projected out: rows s_i o_i^T and
/// responses (Qy)_i for i in N \ J_a.
struct ReducedModel {
    SpectralDecomposition spec;
    Vector y;
    std::vector<std::size_t> kept;  ///< original indices of the retained directions

    Matrix design() const { return spec.reconstruct(); }
};

inline ReducedModel reduce_model(const RidgePath& path, std::span<const std::size_t> aligned) {
    const auto& spec = path.spec();
    detail::require_in_range(aligned, spec.rank(), "reduce_model");
    std::vector<std::size_t> kept;
    std::vector<char> is_aligned(spec.p(), 0);
    for (auto i : aligned) is_aligned[i] = 1;
    for (std::size_t i = 0; i < spec.rank(); ++i) {
        if (!is_aligned[i]) kept.push_back(i);
    }
    if (kept.empty()) {
        throw DegenerateInputError("reduce_model: aligned set covers every nonzero direction");
    }

    const auto n_new = static_cast<Eigen::Index>(kept.size());
    const auto p = static_cast<Eigen::Index>(spec.p());
    Vector s(n_new);
    Vector y_new(n_new);
    Matrix o(p, p);
    Eigen::Index row = 0;
    for (auto i : kept) {
        const auto k = static_cast<Eigen::Index>(i);
        s(row) = spec.singular_values()(k);
        y_new(row) = path.rotated_response()(k);
        o.row(row) = spec.right_frame().row(k);
        ++row;
    }
    // The aligned and null directions complete the orthogonal frame.
    for (std::size_t i = 0; i < spec.p(); ++i) {
        if (i < spec.rank() && !is_aligned[i]) continue;
        o.row(row++) = spec.right_frame().row(static_cast<Eigen::Index>(i));
    }
    ReducedModel out{SpectralDecomposition::from_parts(std::move(s), Matrix::Identity(n_new, n_new),
                                                       std::move(o)),
                     std::move(y_new), std::move(kept)};
    return out;
}

struct SpikeEstimate {
    std::map<std::size_t, double> spike_levels;
    double bulk_level = 0.0;
};

/// Spike and bulk levels from a test spectrum (eigenvalues of the test Gram).
/// Coupled index i takes the i-th largest value; the bulk averages the rest
/// after zero-padding to length p. Everything is multiplied by `n_ratio`.
inline SpikeEstimate estimate_spikes(std::vector<double> test_singular_sq,
                                     std::span<const std::size_t> coupled, std::size_t p,
                                     double n_ratio = 1.0) {
    if (test_singular_sq.empty()) throw ArgumentError("estimate_spikes: empty test spectrum");
    if (test_singular_sq.size() > p) {
        throw ArgumentError("estimate_spikes: more test eigenvalues than p");
    }
    std::sort(test_singular_sq.begin(), test_singular_sq.end(), std::greater<>());
    std::vector<char> is_coupled(p, 0);
    for (auto i : coupled) {
        if (i >= test_singular_sq.size()) {
            throw ArgumentError("estimate_spikes: coupled index " + std::to_string(i) +
                                " exceeds the test spectrum length");
        }
        is_coupled[i] = 1;
    }
    std::size_t n_coupled = 0;
    for (char c : is_coupled) n_coupled += c ? 1 : 0;
    if (n_coupled >= p) throw ArgumentError("estimate_spikes: empty complement of coupled set");

    SpikeEstimate out;
    double rest = 0.0;
    for (std::size_t i = 0; i < test_singular_sq.size(); ++i) {
        if (is_coupled[i]) {
            out.spike_levels[i] = n_ratio * test_singular_sq[i];
        } else {
            rest += test_singular_sq[i];
        }
    }
    out.bulk_level = n_ratio * rest / static_cast<double>(p - n_coupled);
    if (!(out.bulk_level > 0.0)) {
        throw DegenerateInputError("estimate_spikes: bulk level is not positive");
    }
    return out;
}

/// Coupled directions: training vector i is coupled when some test vector
/// overlaps it by more than `threshold` in absolute cosine.
inline std::vector<std::size_t> detect_coupled(const Eigen::Ref<const Matrix>& train_top,
                                               const Eigen::Ref<const Matrix>& test_top,
                                               double threshold = 0.3) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw ArgumentError("detect_coupled: threshold must lie in (0, 1)");
    }
    if (train_top.cols() != test_top.cols()) {
        throw ArgumentError("detect_coupled: frames have different dimension");
    }
    auto check = [](const Eigen::Ref<const Matrix>& f, const char* name) {
        const Matrix g = f * f.transpose();
        const double dev =
            (g - Matrix::Identity(f.rows(), f.rows())).cwiseAbs().maxCoeff();
        if (dev > 1e-6) {
            throw ArgumentError(std::string("detect_coupled: ") + name +
                                " rows are not orthonormal (Gram deviation " +
                                std::to_string(dev) + ")");
        }
    };
    check(train_top, "train");
    check(test_top, "test");
    const Matrix overlap = (train_top * test_top.transpose()).cwiseAbs();
    std::vector<std::size_t> out;
    for (Eigen::Index i = 0; i < overlap.rows(); ++i) {
        if (overlap.row(i).maxCoeff() > threshold) out.push_back(static_cast<std::size_t>(i));
    }
    return out;
}

/// Heuristic aligned-direction screen. Flags i in N whose rotated response
/// exceeds `z_threshold` standard deviations of its unaligned null spread
/// sqrt(sigma2 + s_i^2 r2 n/p). Not a calibrated test.
inline std::vector<std::size_t> select_aligned_heuristic(const RidgePath& path,
                                                         const SnrEstimate& snr,
                                                         double z_threshold = 4.0) {
    const auto& spec = path.spec();
    const double sigma2 = std::max(snr.sigma2_hat, 0.0);
    const double r2 = std::max(snr.r2_hat, 0.0);
    const double per_dir = r2 / spec.gamma();
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < spec.rank(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        const double sd = std::sqrt(sigma2 + spec.singular_sq()(k) * per_dir);
        if (sd > 0.0 && std::abs(path.rotated_response()(k)) / sd > z_threshold) out.push_back(i);
    }
    return out;
}

/**
 * aROTI-GCV risk curve for one dataset.
 *
 * Estimates alpha on J_a, re-estimates (r2, sigma2) on the reduced model and
 * evaluates the aligned risk formula on the training spectrum. The reduced
 * model's r2 is converted from a per-(n - |J_a|) to a per-n normalization.
 */
class ArotiGcv {
public:
    ArotiGcv(const RidgePath& path, std::vector<std::size_t> aligned,
             std::vector<std::size_t> coupled, const SpikeEstimate& spikes,
             std::span<const double> estimation_grid = {},
             SnrRegression method = SnrRegression::first_point)
        : spec_(&path.spec()) {
        std::sort(aligned.begin(), aligned.end());
        aligned.erase(std::unique(aligned.begin(), aligned.end()), aligned.end());
        alpha_ = estimate_alpha(path, aligned);
        ReducedModel reduced = reduce_model(path, aligned);
        RidgePath reduced_path(reduced.spec, reduced.y);
        const std::vector<double> grid =
            estimation_grid.empty()
                ? default_estimation_grid(reduced.spec)
                : std::vector<double>(estimation_grid.begin(), estimation_grid.end());
        try {
            estimate_ = estimate_snr(reduced_path, grid, method);
        } catch (const IdentifiabilityError& e) {
            throw IdentifiabilityError(std::string("aroti_gcv: reduced model grid is degenerate: ") +
                                       e.what());
        }
        const double scale = static_cast<double>(reduced.spec.n()) / static_cast<double>(spec_->n());
        r2_ = std::max(estimate_.r2_hat, 0.0) * scale;
        sigma2_ = std::max(estimate_.sigma2_hat, 0.0);

        alignment_.aligned = std::move(aligned);
        alignment_.coupled = std::move(coupled);
        alignment_.alpha = alpha_.as_map();
        alignment_.spike_levels = spikes.spike_levels;
        alignment_.bulk_level = spikes.bulk_level;
    }

    const SnrEstimate& reduced_estimate() const noexcept { return estimate_; }
    const AlphaEstimate& alpha() const noexcept { return alpha_; }
    const AlignmentSpec& alignment() const noexcept { return alignment_; }
    /// Signal strength of the unaligned part, per original sample count.
    double r2_unaligned() const noexcept { return r2_; }
    double sigma2() const noexcept { return sigma2_; }

    double operator()(double lambda) const {
        return aligned_risk(*spec_, r2_, sigma2_, alignment_, lambda).total;
    }

private:
    const SpectralDecomposition* spec_;
    AlphaEstimate alpha_;
    SnrEstimate estimate_;
    AlignmentSpec alignment_;
    double r2_ = 0.0;
    double sigma2_ = 0.0;
};

inline double aroti_gcv_metric(const SpectralDecomposition& spec, const Eigen::Ref<const Vector>& y,
                               double lambda, std::vector<std::size_t> aligned,
                               std::vector<std::size_t> coupled, const SpikeEstimate& spikes,
                               std::span<const double> estimation_grid = {}) {
    RidgePath path(spec, y);
    return ArotiGcv(path, std::move(aligned), std::move(coupled), spikes, estimation_grid)(lambda);
}

}  // namespace rotigcv

#endif  // ROTIGCV_ALIGNED_HPP
