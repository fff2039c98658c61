#ifndef ROTIGCV_HARNESS_ORACLE_HPP
#define ROTIGCV_HARNESS_ORACLE_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rotigcv/aligned.hpp"
#include "rotigcv/ensembles.hpp"
#include "rotigcv/spectra.hpp"

namespace rotigcv::harness {

/// Test distribution summarized by its second moment C = E[X~^T X~] and the
/// test sample count n'.
struct TestModel {
    double n_prime = 1.0;
    GramModel gram;
};

inline TestModel independent_test_model(double n_prime, double level = 1.0) {
    TestModel t;
    t.n_prime = n_prime;
    t.gram.bulk = level;
    return t;
}

/// Coupled test model: C = bulk I + sum_{i in J_c} (level_i - bulk) o_i o_i^T.
inline TestModel coupled_test_model(const AlignmentSpec& alignment,
                                    const Eigen::Ref<const Matrix>& right_frame, double n_prime) {
    TestModel t;
    t.n_prime = n_prime;
    t.gram.bulk = alignment.bulk_level;
    for (auto i : alignment.coupled) {
        auto it = alignment.spike_levels.find(i);
        if (it == alignment.spike_levels.end()) {
            throw ConfigError("oracle: coupled index " + std::to_string(i) + " has no spike level");
        }
        if (i >= static_cast<std::size_t>(right_frame.rows())) {
            throw ArgumentError("oracle: coupled index out of range");
        }
        t.gram.directions.push_back(right_frame.row(static_cast<Eigen::Index>(i)).transpose());
        t.gram.levels.push_back(it->second);
    }
    return t;
}

/// (1/n') (beta_hat - beta)^T C (beta_hat - beta).
inline double oracle_risk(const Eigen::Ref<const Vector>& beta_hat,
                          const Eigen::Ref<const Vector>& beta, const TestModel& test) {
    if (beta_hat.size() != beta.size()) throw ArgumentError("oracle_risk: size mismatch");
    if (test.gram.directions.size() != test.gram.levels.size()) {
        throw ConfigError("oracle_risk: spike levels and directions differ in count");
    }
    const Vector delta = beta_hat - beta;
    double q = test.gram.bulk * delta.squaredNorm();
    for (std::size_t k = 0; k < test.gram.directions.size(); ++k) {
        const double c = test.gram.directions[k].dot(delta);
        q += (test.gram.levels[k] - test.gram.bulk) * c * c;
    }
    return std::max(q, 0.0) / test.n_prime;
}

/// The same quadratic form evaluated in the training right frame, where
/// O beta_hat is available in O(min(n,p)) per lambda.
class RotatedOracle {
public:
    RotatedOracle(const TestModel& test, const Eigen::Ref<const Matrix>& right_frame)
        : n_prime_(test.n_prime), bulk_(test.gram.bulk), levels_(test.gram.levels) {
        for (const auto& u : test.gram.directions) dirs_.push_back(right_frame * u);
    }

    double operator()(const Eigen::Ref<const Vector>& rotated_delta) const {
        double q = bulk_ * rotated_delta.squaredNorm();
        for (std::size_t k = 0; k < dirs_.size(); ++k) {
            const double c = dirs_[k].dot(rotated_delta);
            q += (levels_[k] - bulk_) * c * c;
        }
        return std::max(q, 0.0) / n_prime_;
    }

private:
    double n_prime_;
    double bulk_;
    std::vector<double> levels_;
    std::vector<Vector> dirs_;
};

struct MonteCarloRisk {
    double mean = 0.0;
    double std_err = 0.0;
};

/// Mean of (1/n') ||X~ (beta_hat - beta)||^2 over `draws` test designs
/// produced by `draw_design(d)`.
inline MonteCarloRisk oracle_risk_mc(const Eigen::Ref<const Vector>& beta_hat,
                                     const Eigen::Ref<const Vector>& beta,
                                     const std::function<Matrix(std::size_t)>& draw_design,
                                     std::size_t draws) {
    if (draws < 2) throw ArgumentError("oracle_risk_mc: draws must be >= 2");
    const Vector delta = beta_hat - beta;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t d = 0; d < draws; ++d) {
        const Matrix xt = draw_design(d);
        if (xt.cols() != delta.size()) throw ArgumentError("oracle_risk_mc: test design has wrong p");
        const double r = (xt * delta).squaredNorm() / static_cast<double>(xt.rows());
        sum += r;
        sum_sq += r * r;
    }
    const double dn = static_cast<double>(draws);
    MonteCarloRisk out;
    out.mean = sum / dn;
    const double var = std::max(sum_sq / dn - out.mean * out.mean, 0.0) * dn / (dn - 1.0);
    out.std_err = std::sqrt(var / dn);
    return out;
}

inline MonteCarloRisk oracle_risk_mc(const Eigen::Ref<const Vector>& beta_hat,
                                     const Eigen::Ref<const Vector>& beta,
                                     const EnsembleSpec& test_ensemble, std::size_t draws,
                                     std::uint64_t seed) {
    EnsembleSpec e = test_ensemble;
    e.seed = seed;
    return oracle_risk_mc(
        beta_hat, beta,
        [&](std::size_t d) { return generate_design(e, streams::oracle_mc + d); }, draws);
}

/// Test design sharing the training right singular vectors on `coupled`: the
/// test spectrum and left frame come from a fresh draw of `test_ensemble`, the
/// coupled rows of the right frame are copied from training and the rest is a
/// Haar basis of their orthogonal complement.
inline Matrix coupled_test_design(const Eigen::Ref<const Matrix>& train_right_frame,
                                  std::span<const std::size_t> coupled,
                                  const EnsembleSpec& test_ensemble, std::uint64_t stream) {
    const auto p = static_cast<Eigen::Index>(test_ensemble.p);
    if (train_right_frame.rows() != p || train_right_frame.cols() != p) {
        throw ArgumentError("coupled_test_design: frame dimension differs from test p");
    }
    const auto base = svd_decompose(generate_design(test_ensemble, stream));
    std::vector<char> is_coupled(static_cast<std::size_t>(p), 0);
    for (auto i : coupled) {
        if (i >= static_cast<std::size_t>(p)) throw ArgumentError("coupled_test_design: index out of range");
        is_coupled[i] = 1;
    }
    const auto k = static_cast<Eigen::Index>(coupled.size());

    Engine eng = make_engine(test_ensemble.seed, stream + 0x9e3779b9ULL);
    Matrix g = gaussian_matrix(p, p - k, eng);
    for (auto i : coupled) {
        const auto o = train_right_frame.row(static_cast<Eigen::Index>(i)).transpose();
        g -= o * (o.transpose() * g);
    }
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix basis = qr.householderQ() * Matrix::Identity(p, p - k);
    const Matrix& r = qr.matrixQR();
    for (Eigen::Index j = 0; j < p - k; ++j) {
        if (r(j, j) < 0.0) basis.col(j) *= -1.0;
    }

    Matrix o(p, p);
    Eigen::Index next = 0;
    for (Eigen::Index i = 0; i < p; ++i) {
        if (is_coupled[static_cast<std::size_t>(i)]) {
            o.row(i) = train_right_frame.row(i);
        } else {
            o.row(i) = basis.col(next++).transpose();
        }
    }
    const auto n = static_cast<Eigen::Index>(test_ensemble.n);
    Matrix d = Matrix::Zero(n, p);
    for (Eigen::Index i = 0; i < base.singular_values().size(); ++i) d(i, i) = base.singular_values()(i);
    return base.left_frame().transpose() * d * o;
}

/// Expected test-Gram levels along the coupled directions, averaged over
/// `draws` test spectra, with the bulk fixed by the ensemble's exact trace.
inline SpikeEstimate expected_coupled_levels(const EnsembleSpec& test_ensemble,
                                             std::span<const std::size_t> coupled,
                                             std::size_t draws, std::uint64_t first_stream) {
    if (draws < 1) throw ArgumentError("expected_coupled_levels: draws must be >= 1");
    std::vector<double> mean;
    for (std::size_t d = 0; d < draws; ++d) {
        const auto ev = gram_eigenvalues(generate_design(test_ensemble, first_stream + d));
        if (mean.empty()) mean.assign(ev.size(), 0.0);
        for (std::size_t i = 0; i < ev.size(); ++i) mean[i] += ev[i] / static_cast<double>(draws);
    }
    const auto pop = population_gram(test_ensemble);
    double trace = pop.bulk * static_cast<double>(test_ensemble.p);
    for (double l : pop.levels) trace += l - pop.bulk;

    SpikeEstimate out;
    double spiked = 0.0;
    for (auto i : coupled) {
        if (i >= mean.size()) throw ArgumentError("expected_coupled_levels: index out of range");
        out.spike_levels[i] = mean[i];
        spiked += mean[i];
    }
    const double rest = static_cast<double>(test_ensemble.p) - static_cast<double>(out.spike_levels.size());
    out.bulk_level = (trace - spiked) / rest;
    if (!(out.bulk_level > 0.0)) {
        throw DegenerateInputError("expected_coupled_levels: bulk level is not positive");
    }
    return out;
}

}  // namespace rotigcv::harness

#endif  // ROTIGCV_HARNESS_ORACLE_HPP
