#ifndef ROTIGCV_ENSEMBLES_HPP
#define ROTIGCV_ENSEMBLES_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rotigcv/spectra.hpp"

namespace rotigcv {

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

using Engine = std::mt19937_64;

/// Independent engine for (seed, stream). Streams never share state, so any
/// work unit can be generated on any thread in any order.
inline Engine make_engine(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32), 0x5eedu};
    return Engine(seq);
}

namespace streams {
inline constexpr std::uint64_t design = 1;
inline constexpr std::uint64_t signal = 2;
inline constexpr std::uint64_t test_design = 3;
inline constexpr std::uint64_t coupled_levels = 1000;  ///< + draw index
inline constexpr std::uint64_t noise = 1'000'000;      ///< + resample index
inline constexpr std::uint64_t oracle_mc = 2'000'000;  ///< + draw index
}  // namespace streams

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Engine& eng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Matrix g(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = nd(eng);
    }
    return g;
}

/// First `cols` columns of a Haar-distributed orthogonal matrix.
inline Matrix haar_columns(Eigen::Index rows, Eigen::Index cols, Engine& eng) {
    const Matrix g = gaussian_matrix(rows, cols, eng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
    const Matrix& r = qr.matrixQR();
    for (Eigen::Index j = 0; j < cols; ++j) {
        if (r(j, j) < 0.0) q.col(j) *= -1.0;
    }
    return q;
}

// ---------------------------------------------------------------------------
// Design ensembles
// ---------------------------------------------------------------------------

enum class Family {
    gaussian_iid,
    autocorrelated_rows,
    equicorrelated_columns,
    multivariate_t_rows,
    product_of_gaussians,
    spiked,
    gaussian_mixture_rows,
    row_equicorrelated,
};

inline std::string_view to_string(Family f) {
    switch (f) {
        case Family::gaussian_iid: return "gaussian_iid";
        case Family::autocorrelated_rows: return "autocorrelated_rows";
        case Family::equicorrelated_columns: return "equicorrelated_columns";
        case Family::multivariate_t_rows: return "multivariate_t_rows";
        case Family::product_of_gaussians: return "product_of_gaussians";
        case Family::spiked: return "spiked";
        case Family::gaussian_mixture_rows: return "gaussian_mixture_rows";
        case Family::row_equicorrelated: return "row_equicorrelated";
    }
    return "unknown";
}

inline Family parse_family(std::string_view name) {
    for (Family f : {Family::gaussian_iid, Family::autocorrelated_rows,
                     Family::equicorrelated_columns, Family::multivariate_t_rows,
                     Family::product_of_gaussians, Family::spiked, Family::gaussian_mixture_rows,
                     Family::row_equicorrelated}) {
        if (to_string(f) == name) return f;
    }
    throw ArgumentError("unknown ensemble family '" + std::string(name) + "'");
}

/// True for the families whose right singular frame is exactly Haar.
inline bool is_rotationally_invariant(Family f) {
    return f != Family::gaussian_mixture_rows && f != Family::row_equicorrelated;
}

struct EnsembleParams {
    double rho = 0.0;              ///< autocorrelation / equicorrelation
    double nu = 3.0;               ///< multivariate-t degrees of freedom
    std::size_t spike_rank = 1;    ///< spiked: rank r of V W^T
    double spike_strength = 1.0;   ///< spiked: multiplier of V W^T
    std::size_t factors = 2;       ///< product_of_gaussians: number of factors
    std::size_t inner_dim = 0;     ///< product_of_gaussians: inner dimension (0 means p)
    double mixture_mean = 3.0;     ///< mixture centers are +/- mixture_mean * 1
};

struct EnsembleSpec {
    Family family = Family::gaussian_iid;
    EnsembleParams params;
    std::size_t n = 0;
    std::size_t p = 0;
    std::uint64_t seed = 0;
};

inline void validate(const EnsembleSpec& ens) {
    if (ens.n < 1 || ens.p < 1) throw ArgumentError("ensemble: n and p must be >= 1");
    const auto& pr = ens.params;
    switch (ens.family) {
        case Family::autocorrelated_rows:
        case Family::equicorrelated_columns:
        case Family::row_equicorrelated:
            if (!(pr.rho > -1.0 && pr.rho < 1.0)) {
                throw ArgumentError("ensemble: parameter 'rho' must lie in (-1, 1)");
            }
            break;
        case Family::multivariate_t_rows:
            if (!(pr.nu >= 3.0)) throw ArgumentError("ensemble: parameter 'nu' must be >= 3");
            break;
        case Family::product_of_gaussians:
            if (pr.factors < 2) throw ArgumentError("ensemble: parameter 'factors' must be >= 2");
            break;
        case Family::spiked:
            if (pr.spike_rank < 1 || pr.spike_rank > std::min(ens.n, ens.p)) {
                throw ArgumentError("ensemble: parameter 'spike_rank' must lie in [1, min(n,p)]");
            }
            if (!std::isfinite(pr.spike_strength)) {
                throw ArgumentError("ensemble: parameter 'spike_strength' must be finite");
            }
            break;
        case Family::gaussian_mixture_rows:
            if (!std::isfinite(pr.mixture_mean)) {
                throw ArgumentError("ensemble: parameter 'mixture_mean' must be finite");
            }
            break;
        case Family::gaussian_iid: break;
    }
    if (ens.family == Family::equicorrelated_columns &&
        1.0 - pr.rho + static_cast<double>(ens.n) * pr.rho < 0.0) {
        throw ArgumentError("ensemble: parameter 'rho' gives an indefinite covariance");
    }
    if (ens.family == Family::row_equicorrelated &&
        1.0 - pr.rho + static_cast<double>(ens.p) * pr.rho < 0.0) {
        throw ArgumentError("ensemble: parameter 'rho' gives an indefinite covariance");
    }
}

namespace detail {

// Applies the square root of (1-rho) I + rho 1 1^T to every column of g.
inline void equicorrelate_columns(Matrix& g, double rho) {
    const double dim = static_cast<double>(g.rows());
    const double a = std::sqrt(1.0 - rho);
    const double top = std::sqrt(1.0 - rho + dim * rho);
    const Eigen::RowVectorXd mean = g.colwise().sum() / dim;  // (u^T g) / sqrt(dim)
    g *= a;
    g.rowwise() += (top - a) * mean;
}

}  // namespace detail

/// One draw of the design. Every family is scaled so that E[X^T X] has unit
/// average diagonal for the isotropic constructions (entries of variance 1/n).
inline Matrix generate_design(const EnsembleSpec& ens, std::uint64_t stream = streams::design) {
    validate(ens);
    Engine eng = make_engine(ens.seed, stream);
    const auto n = static_cast<Eigen::Index>(ens.n);
    const auto p = static_cast<Eigen::Index>(ens.p);
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(ens.n));
    const auto& pr = ens.params;

    switch (ens.family) {
        case Family::gaussian_iid:
            return gaussian_matrix(n, p, eng) * inv_sqrt_n;

        case Family::autocorrelated_rows: {
            Matrix x = gaussian_matrix(n, p, eng);
            const double c = std::sqrt(1.0 - pr.rho * pr.rho);
            for (Eigen::Index i = 1; i < n; ++i) x.row(i) = pr.rho * x.row(i - 1) + c * x.row(i);
            return x * inv_sqrt_n;
        }

        case Family::equicorrelated_columns: {
            Matrix x = gaussian_matrix(n, p, eng);
            detail::equicorrelate_columns(x, pr.rho);
            return x * inv_sqrt_n;
        }

        case Family::multivariate_t_rows: {
            Matrix x = gaussian_matrix(n, p, eng);
            std::chi_squared_distribution<double> chi(pr.nu);
            // Unit covariance: the t law has covariance nu/(nu-2).
            const double unit = std::sqrt((pr.nu - 2.0) / pr.nu);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double w = chi(eng) / pr.nu;
                x.row(i) *= unit / std::sqrt(w);
            }
            return x * inv_sqrt_n;
        }

        case Family::product_of_gaussians: {
            const auto inner = static_cast<Eigen::Index>(pr.inner_dim == 0 ? ens.p : pr.inner_dim);
            Matrix x = gaussian_matrix(n, inner, eng);
            double norm = 1.0;
            for (std::size_t f = 1; f + 1 < pr.factors; ++f) {
                x = x * gaussian_matrix(inner, inner, eng);
                norm *= static_cast<double>(inner);
            }
            x = x * gaussian_matrix(inner, p, eng);
            norm *= static_cast<double>(inner);
            return x * (inv_sqrt_n / std::sqrt(norm));
        }

        case Family::spiked: {
            const auto r = static_cast<Eigen::Index>(pr.spike_rank);
            const Matrix v = haar_columns(n, r, eng);
            const Matrix w = haar_columns(p, r, eng);
            Matrix x = gaussian_matrix(n, p, eng) * inv_sqrt_n;
            x.noalias() += pr.spike_strength * v * w.transpose();
            return x;
        }

        case Family::gaussian_mixture_rows: {
            Matrix x = gaussian_matrix(n, p, eng);
            std::bernoulli_distribution coin(0.5);
            for (Eigen::Index i = 0; i < n; ++i) {
                x.row(i).array() += coin(eng) ? pr.mixture_mean : -pr.mixture_mean;
            }
            return x * inv_sqrt_n;
        }

        case Family::row_equicorrelated: {
            Matrix xt = gaussian_matrix(p, n, eng);
            detail::equicorrelate_columns(xt, pr.rho);
            return xt.transpose() * inv_sqrt_n;
        }
    }
    throw ArgumentError("generate_design: unhandled family");
}

/// Second-moment model C = bulk I + sum_k (level_k - bulk) u_k u_k^T with
/// orthonormal u_k. Used for E[X^T X] of test ensembles.
struct GramModel {
    double bulk = 1.0;
    std::vector<Vector> directions;
    std::vector<double> levels;
};

/// Exact E[X^T X] of one draw of the ensemble.
inline GramModel population_gram(const EnsembleSpec& ens) {
    validate(ens);
    const double p = static_cast<double>(ens.p);
    const auto& pr = ens.params;
    GramModel g;
    switch (ens.family) {
        case Family::spiked:
            g.bulk = 1.0 + pr.spike_strength * pr.spike_strength *
                               static_cast<double>(pr.spike_rank) / p;
            break;
        case Family::gaussian_mixture_rows:
            g.bulk = 1.0;
            g.directions.push_back(Vector::Constant(static_cast<Eigen::Index>(ens.p), 1.0 / std::sqrt(p)));
            g.levels.push_back(1.0 + pr.mixture_mean * pr.mixture_mean * p);
            break;
        case Family::row_equicorrelated:
            g.bulk = 1.0 - pr.rho;
            g.directions.push_back(Vector::Constant(static_cast<Eigen::Index>(ens.p), 1.0 / std::sqrt(p)));
            g.levels.push_back(1.0 - pr.rho + p * pr.rho);
            break;
        default:
            g.bulk = 1.0;
            break;
    }
    return g;
}

struct ScaledDesign {
    Matrix x;
    double factor = 1.0;  ///< the input was divided by this
};

/// Rescale so that n' Tr(X^T X) / (n p) = 1.
inline ScaledDesign normalize_scale(const Eigen::Ref<const Matrix>& x, double n_prime) {
    if (!(n_prime > 0.0)) throw ArgumentError("normalize_scale: n_prime must be > 0");
    const double tr = x.squaredNorm();
    if (!(tr > 0.0)) throw DegenerateInputError("normalize_scale: zero design");
    const double n = static_cast<double>(x.rows());
    const double p = static_cast<double>(x.cols());
    const double factor = std::sqrt(n_prime * tr / (n * p));
    return {x / factor, factor};
}

// ---------------------------------------------------------------------------
// Signal and noise
// ---------------------------------------------------------------------------

struct SignalSpec {
    double r2 = 1.0;                     ///< target ||beta||^2 / n
    std::vector<std::size_t> aligned;    ///< J_a (0-based ranks)
    std::vector<double> alpha;           ///< coefficient of sqrt(n) o_i for each aligned index
    std::uint64_t seed = 0;
};

/// beta = beta' + sum_i sqrt(n) alpha_i o_i with beta' uniformly random in the
/// orthogonal complement of the aligned directions and ||beta||^2 = n r2.
inline Vector make_signal(const SignalSpec& sig, const Eigen::Ref<const Matrix>& right_frame,
                          std::size_t n, std::size_t p) {
    if (sig.aligned.size() != sig.alpha.size()) {
        throw ArgumentError("make_signal: aligned indices and alpha differ in length");
    }
    if (static_cast<std::size_t>(right_frame.rows()) != p ||
        static_cast<std::size_t>(right_frame.cols()) != p) {
        throw ArgumentError("make_signal: right frame must be p x p");
    }
    if (!(sig.r2 >= 0.0)) throw ArgumentError("make_signal: r2 must be >= 0");
    double aligned_mass = 0.0;
    for (double a : sig.alpha) aligned_mass += a * a;
    if (aligned_mass > sig.r2 * (1.0 + 1e-12)) {
        throw ArgumentError("make_signal: infeasible signal, sum alpha^2 = " +
                            std::to_string(aligned_mass) + " exceeds r2 = " +
                            std::to_string(sig.r2));
    }
    const double dn = static_cast<double>(n);
    const double sqrt_n = std::sqrt(dn);
    const auto dim = static_cast<Eigen::Index>(p);

    Vector aligned_part = Vector::Zero(dim);
    for (std::size_t k = 0; k < sig.aligned.size(); ++k) {
        if (sig.aligned[k] >= p) throw ArgumentError("make_signal: aligned index out of range");
        aligned_part += sqrt_n * sig.alpha[k] *
                        right_frame.row(static_cast<Eigen::Index>(sig.aligned[k])).transpose();
    }

    Engine eng = make_engine(sig.seed, streams::signal);
    Vector g = gaussian_matrix(dim, 1, eng).col(0);
    for (auto i : sig.aligned) {
        const auto o = right_frame.row(static_cast<Eigen::Index>(i)).transpose();
        g -= o.dot(g) * o;
    }
    const double residual = std::max(sig.r2 - aligned_mass, 0.0) * dn;
    Vector beta = aligned_part;
    if (residual > 0.0) {
        const double gn = g.norm();
        if (!(gn > 0.0)) throw DegenerateInputError("make_signal: aligned set spans R^p");
        beta += std::sqrt(residual) / gn * g;
    }
    // Floating-point cleanup so that ||beta||^2 / n matches r2 to rounding.
    const double realized = beta.squaredNorm();
    if (realized > 0.0) beta *= std::sqrt(sig.r2 * dn / realized);
    return beta;
}

enum class NoiseKind { gaussian, rademacher_scaled, student_t };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::gaussian;
    double nu = 5.0;  ///< student_t degrees of freedom
};

inline std::string_view to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::gaussian: return "gaussian";
        case NoiseKind::rademacher_scaled: return "rademacher_scaled";
        case NoiseKind::student_t: return "student_t";
    }
    return "unknown";
}

inline NoiseKind parse_noise_kind(std::string_view name) {
    if (name == "gaussian") return NoiseKind::gaussian;
    if (name == "rademacher_scaled" || name == "rademacher") return NoiseKind::rademacher_scaled;
    if (name == "student_t") return NoiseKind::student_t;
    throw ArgumentError("unsupported noise family '" + std::string(name) + "'");
}

/// Centered noise with variance sigma2.
inline Vector sample_noise(std::size_t n, double sigma2, const NoiseSpec& noise,
                           std::uint64_t seed, std::uint64_t stream) {
    if (!(sigma2 >= 0.0)) throw ArgumentError("sample_noise: sigma2 must be >= 0");
    Engine eng = make_engine(seed, stream);
    const double sd = std::sqrt(sigma2);
    Vector e(static_cast<Eigen::Index>(n));
    switch (noise.kind) {
        case NoiseKind::gaussian: {
            std::normal_distribution<double> nd(0.0, 1.0);
            for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = sd * nd(eng);
            break;
        }
        case NoiseKind::rademacher_scaled: {
            std::bernoulli_distribution coin(0.5);
            for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = coin(eng) ? sd : -sd;
            break;
        }
        case NoiseKind::student_t: {
            if (!(noise.nu >= 5.0)) throw ArgumentError("sample_noise: student_t needs nu >= 5");
            std::student_t_distribution<double> td(noise.nu);
            const double unit = std::sqrt((noise.nu - 2.0) / noise.nu);
            for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = sd * unit * td(eng);
            break;
        }
    }
    return e;
}

/// y = X beta + eps. A fresh `stream` resamples only the noise.
inline Vector sample_response(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& beta,
                              double sigma2, const NoiseSpec& noise, std::uint64_t seed,
                              std::uint64_t stream = streams::noise) {
    if (x.cols() != beta.size()) throw ArgumentError("sample_response: X/beta size mismatch");
    Vector y = x * beta;
    if (sigma2 > 0.0) y += sample_noise(static_cast<std::size_t>(x.rows()), sigma2, noise, seed, stream);
    return y;
}

}  // namespace rotigcv

#endif  // ROTIGCV_ENSEMBLES_HPP
