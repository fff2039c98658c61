#ifndef ROTIGCV_HARNESS_EXPERIMENT_HPP
#define ROTIGCV_HARNESS_EXPERIMENT_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rotigcv/aligned.hpp"
#include "rotigcv/baselines.hpp"
#include "rotigcv/ensembles.hpp"
#include "rotigcv/harness/config.hpp"
#include "rotigcv/harness/oracle.hpp"
#include "rotigcv/ridge.hpp"
#include "rotigcv/roti_gcv.hpp"
#include "rotigcv/spectra.hpp"

namespace rotigcv::harness {

struct ResultRow {
    std::string method;
    double lambda = 0.0;
    double metric_value = 0.0;
    double exact_risk = 0.0;
    std::uint64_t seed = 0;
    std::size_t resample = 0;
    double r2_hat = 0.0;
    double sigma2_hat = 0.0;
    bool tuned = false;
};

struct MethodCurve {
    std::string method;  ///< as in ResultRow, e.g. "gcv" (raw) or "gcv_adj"
    std::vector<double> metric;
    std::size_t tuned_index = 0;
};

/// Everything computed for one (seed, resample) cell.
struct CellResult {
    std::uint64_t seed = 0;
    std::size_t resample = 0;
    double r2_true = 0.0;
    double r2_hat = 0.0;
    double sigma2_hat = 0.0;
    std::vector<double> exact_risk;  ///< over the lambda sweep
    std::vector<MethodCurve> curves;
    std::vector<std::size_t> aligned_used;
    std::vector<double> alpha_hat;   ///< aROTI-GCV estimates on aligned_used
    double aroti_r2_hat = 0.0;       ///< unaligned signal strength, per n
    double aroti_sigma2_hat = 0.0;

    const MethodCurve* curve(const std::string& name) const {
        for (const auto& c : curves)
            if (c.method == name) return &c;
        return nullptr;
    }
};

struct CellError {
    std::uint64_t seed = 0;
    std::optional<std::size_t> resample;  ///< empty when the per-seed setup failed
    std::string kind;
    std::string message;
};

struct ExperimentResult {
    std::vector<double> lambda_sweep;
    std::vector<CellResult> cells;  ///< ordered by (seed, resample)
    std::vector<CellError> errors;
    std::vector<std::string> warnings;

    std::vector<ResultRow> rows() const {
        std::vector<ResultRow> out;
        for (const auto& c : cells) {
            for (const auto& m : c.curves) {
                for (std::size_t i = 0; i < lambda_sweep.size(); ++i) {
                    ResultRow r;
                    r.method = m.method;
                    r.lambda = lambda_sweep[i];
                    r.metric_value = m.metric[i];
                    r.exact_risk = c.exact_risk[i];
                    r.seed = c.seed;
                    r.resample = c.resample;
                    if (m.method == "aroti_gcv") {
                        r.r2_hat = c.aroti_r2_hat;
                        r.sigma2_hat = c.aroti_sigma2_hat;
                    } else {
                        r.r2_hat = c.r2_hat;
                        r.sigma2_hat = c.sigma2_hat;
                    }
                    r.tuned = i == m.tuned_index;
                    out.push_back(std::move(r));
                }
            }
        }
        return out;
    }
};

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Exceptions
/// escaping fn terminate the program; callers catch inside fn.
inline void parallel_for(std::size_t count, std::size_t threads,
                         const std::function<void(std::size_t)>& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

namespace detail {

// Per-seed state shared read-only by that seed's resample cells.
struct SeedContext {
    std::uint64_t seed = 0;
    Matrix x;
    SpectralDecomposition spec;
    Vector beta;
    Vector x_beta;
    Vector rotated_beta;  // O beta
    double r2_true = 0.0;
    std::unique_ptr<RotatedOracle> oracle;
    SpikeEstimate spikes;  // aROTI-GCV input
    std::vector<double> estimation_grid;
};

inline std::unique_ptr<SeedContext> prepare_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
    auto ctx = std::make_unique<SeedContext>();
    ctx->seed = seed;
    EnsembleSpec ens = cfg.ensemble;
    ens.seed = seed;
    ctx->x = generate_design(ens, streams::design);
    double scale = 1.0;
    if (cfg.normalize) {
        auto scaled = normalize_scale(ctx->x, static_cast<double>(ens.n));
        ctx->x = std::move(scaled.x);
        scale = scaled.factor;
    }
    ctx->spec = svd_decompose(ctx->x);
    const auto n = ens.n;
    const auto p = ens.p;

    SignalSpec sig = cfg.signal;
    sig.r2 = cfg.signal_r2();
    sig.seed = seed;
    ctx->r2_true = sig.r2;
    ctx->beta = make_signal(sig, ctx->spec.right_frame(), n, p);
    ctx->x_beta = ctx->x * ctx->beta;
    ctx->rotated_beta = ctx->spec.right_frame() * ctx->beta;

    EnsembleSpec test = cfg.test.ensemble;
    test.seed = seed;
    const double inv_scale2 = 1.0 / (scale * scale);
    TestModel model;
    if (cfg.test.mode == TestMode::independent) {
        model.n_prime = static_cast<double>(n);
        model.gram = population_gram(test);
    } else {
        const auto levels =
            expected_coupled_levels(test, cfg.test.coupled, cfg.test.spike_draws, streams::coupled_levels);
        AlignmentSpec a;
        a.coupled = cfg.test.coupled;
        a.spike_levels = levels.spike_levels;
        a.bulk_level = levels.bulk_level;
        model = coupled_test_model(a, ctx->spec.right_frame(), static_cast<double>(n));
    }
    model.gram.bulk *= inv_scale2;
    for (auto& l : model.gram.levels) l *= inv_scale2;
    ctx->oracle = std::make_unique<RotatedOracle>(model, ctx->spec.right_frame());

    if (cfg.has_method(MethodKind::aroti_gcv)) {
        std::vector<double> ev;
        if (cfg.test.spike_source == SpikeSource::test) {
            ev = gram_eigenvalues(generate_design(test, streams::test_design));
            for (auto& v : ev) v *= inv_scale2;
        } else {
            const Vector& s2 = ctx->spec.singular_sq();
            ev.assign(s2.data(), s2.data() + s2.size());
        }
        ctx->spikes = estimate_spikes(std::move(ev), cfg.test.coupled, p);
    }

    ctx->estimation_grid =
        cfg.estimation_grid.empty() ? default_estimation_grid(ctx->spec) : cfg.estimation_grid;
    return ctx;
}

inline std::vector<double> evaluate(const std::function<double(double)>& f,
                                    const std::vector<double>& grid) {
    std::vector<double> out;
    out.reserve(grid.size());
    for (double l : grid) {
        try {
            out.push_back(f(l));
        } catch (const Error& e) {
            throw Error(e.kind(), std::string(e.what()) + " (lambda=" + std::to_string(l) + ")");
        }
    }
    return out;
}

inline void add_curve(CellResult& cell, std::string name, std::vector<double> metric,
                      const std::vector<double>& sweep) {
    MethodCurve c;
    c.method = std::move(name);
    c.tuned_index = tune_lambda(
                        [&](double l) {
                            const auto it = std::find(sweep.begin(), sweep.end(), l);
                            return metric[static_cast<std::size_t>(it - sweep.begin())];
                        },
                        sweep)
                        .index;
    c.metric = std::move(metric);
    cell.curves.push_back(std::move(c));
}

inline CellResult run_cell(const ExperimentConfig& cfg, const SeedContext& ctx, std::size_t r) {
    const auto& sweep = cfg.lambda_sweep;
    CellResult cell;
    cell.seed = ctx.seed;
    cell.resample = r;
    cell.r2_true = ctx.r2_true;

    Vector y = ctx.x_beta;
    if (cfg.sigma2 > 0.0) {
        y += sample_noise(ctx.spec.n(), cfg.sigma2, cfg.noise, ctx.seed, streams::noise + r);
    }
    RidgePath path(ctx.spec, y);

    cell.exact_risk.reserve(sweep.size());
    for (double l : sweep) {
        cell.exact_risk.push_back((*ctx.oracle)(path.rotated_coefficients(l) - ctx.rotated_beta));
    }

    const RotiGcv roti(path, ctx.estimation_grid, cfg.regression);
    cell.r2_hat = roti.estimate().r2_hat;
    cell.sigma2_hat = roti.estimate().sigma2_hat;
    const double sigma2_adj = cell.sigma2_hat;

    for (const auto& m : cfg.methods) {
        std::vector<double> metric;
        switch (m.kind) {
            case MethodKind::roti_gcv:
                metric = evaluate(roti, sweep);
                break;
            case MethodKind::aroti_gcv: {
                std::vector<std::size_t> ja;
                switch (cfg.aroti.source) {
                    case AlignedSource::signal: ja = cfg.signal.aligned; break;
                    case AlignedSource::none: break;
                    case AlignedSource::list: ja = cfg.aroti.aligned; break;
                    case AlignedSource::heuristic:
                        ja = select_aligned_heuristic(path, roti.estimate(), cfg.aroti.z_threshold);
                        break;
                }
                const ArotiGcv aroti(path, ja, cfg.test.coupled, ctx.spikes, {}, cfg.regression);
                metric = evaluate(aroti, sweep);
                cell.aligned_used = aroti.alignment().aligned;
                cell.alpha_hat = aroti.alpha().alpha;
                cell.aroti_r2_hat = aroti.r2_unaligned();
                cell.aroti_sigma2_hat = aroti.sigma2();
                break;
            }
            case MethodKind::gcv:
                metric = evaluate([&](double l) { return gcv_metric(path, l); }, sweep);
                break;
            case MethodKind::loocv:
                metric = evaluate([&](double l) { return loocv_metric(path, l); }, sweep);
                break;
            case MethodKind::kfold:
                metric = kfold_curve(ctx.x, y, sweep, m.k, ctx.seed * 1000003ULL + r);
                break;
        }
        std::vector<double> adjusted;
        if (m.has_adjusted()) {
            adjusted = metric;
            for (auto& v : adjusted) v -= sigma2_adj;
        }
        add_curve(cell, m.name(), std::move(metric), sweep);
        if (m.has_adjusted()) add_curve(cell, m.name() + "_adj", std::move(adjusted), sweep);
    }
    return cell;
}

}  // namespace detail

struct RunOptions {
    std::size_t threads = 1;
};

/// One design and signal per seed; fresh noise per resample; every method's
/// curve over the lambda sweep with the exact conditional risk alongside.
/// A failing cell is reported in `errors` and skipped; output order is
/// (seed, resample) regardless of scheduling.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
    validate(cfg);
    ExperimentResult res;
    res.lambda_sweep = cfg.lambda_sweep;
    if (cfg.has_method(MethodKind::aroti_gcv) && cfg.noise.kind != NoiseKind::gaussian) {
        res.warnings.push_back("aroti_gcv: non-Gaussian noise; the consistency result assumes Gaussian noise");
    }

    const std::size_t n_seeds = cfg.seeds.size();
    std::vector<std::unique_ptr<detail::SeedContext>> contexts(n_seeds);
    std::vector<std::optional<CellError>> seed_errors(n_seeds);
    parallel_for(n_seeds, opt.threads, [&](std::size_t s) {
        try {
            contexts[s] = detail::prepare_seed(cfg, cfg.seeds[s]);
        } catch (const Error& e) {
            seed_errors[s] = CellError{cfg.seeds[s], std::nullopt, e.kind(), e.what()};
        } catch (const std::exception& e) {
            seed_errors[s] = CellError{cfg.seeds[s], std::nullopt, "internal", e.what()};
        }
    });

    const std::size_t R = cfg.n_noise_resamples;
    std::vector<std::optional<CellResult>> cells(n_seeds * R);
    std::vector<std::optional<CellError>> cell_errors(n_seeds * R);
    parallel_for(n_seeds * R, opt.threads, [&](std::size_t idx) {
        const std::size_t s = idx / R;
        const std::size_t r = idx % R;
        if (!contexts[s]) return;
        try {
            cells[idx] = detail::run_cell(cfg, *contexts[s], r);
        } catch (const Error& e) {
            cell_errors[idx] = CellError{cfg.seeds[s], r, e.kind(), e.what()};
        } catch (const std::exception& e) {
            cell_errors[idx] = CellError{cfg.seeds[s], r, "internal", e.what()};
        }
    });

    for (std::size_t s = 0; s < n_seeds; ++s) {
        if (seed_errors[s]) res.errors.push_back(*seed_errors[s]);
        for (std::size_t r = 0; r < R; ++r) {
            const std::size_t idx = s * R + r;
            if (cells[idx]) res.cells.push_back(std::move(*cells[idx]));
            if (cell_errors[idx]) res.errors.push_back(*cell_errors[idx]);
        }
    }
    return res;
}

}  // namespace rotigcv::harness

#endif  // ROTIGCV_HARNESS_EXPERIMENT_HPP
