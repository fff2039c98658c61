#ifndef ROTIGCV_HARNESS_CONFIG_HPP
#define ROTIGCV_HARNESS_CONFIG_HPP

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rotigcv/ensembles.hpp"
#include "rotigcv/roti_gcv.hpp"

namespace rotigcv::harness {

enum class MethodKind { roti_gcv, aroti_gcv, gcv, loocv, kfold };

struct MethodSpec {
    MethodKind kind = MethodKind::roti_gcv;
    std::size_t k = 0;  ///< folds, kfold only

    std::string name() const {
        switch (kind) {
            case MethodKind::roti_gcv: return "roti_gcv";
            case MethodKind::aroti_gcv: return "aroti_gcv";
            case MethodKind::gcv: return "gcv";
            case MethodKind::loocv: return "loocv";
            case MethodKind::kfold: return "kfold" + std::to_string(k);
        }
        return "unknown";
    }
    /// GCV-type metrics estimate risk + sigma^2 and also get an adjusted row.
    bool has_adjusted() const {
        return kind == MethodKind::gcv || kind == MethodKind::loocv || kind == MethodKind::kfold;
    }
};

enum class TestMode { independent, coupled };
enum class SpikeSource { test, train };
enum class AlignedSource { signal, none, heuristic, list };

struct TestSpec {
    TestMode mode = TestMode::independent;
    std::vector<std::size_t> coupled;  ///< J_c, used by aROTI-GCV and the coupled oracle
    EnsembleSpec ensemble;             ///< test ensemble; n always equals the training n
    SpikeSource spike_source = SpikeSource::test;
    std::size_t spike_draws = 4;       ///< test spectra averaged for the coupled oracle levels
};

struct ArotiSpec {
    AlignedSource source = AlignedSource::signal;
    std::vector<std::size_t> aligned;  ///< explicit J_a when source == list
    double z_threshold = 4.0;
};

struct ExperimentConfig {
    std::string name = "experiment";
    EnsembleSpec ensemble;
    SignalSpec signal;
    std::optional<double> beta_prime_norm_sq;  ///< when set, r2 = this / n + sum alpha^2
    double sigma2 = 1.0;
    NoiseSpec noise;
    std::vector<double> lambda_sweep;
    std::vector<double> estimation_grid;  ///< empty: default grid from the training spectrum
    SnrRegression regression = SnrRegression::first_point;
    std::vector<MethodSpec> methods;
    std::size_t n_noise_resamples = 1;
    TestSpec test;
    ArotiSpec aroti;
    std::vector<std::uint64_t> seeds{1};
    bool normalize = false;

    bool has_method(MethodKind k) const {
        for (const auto& m : methods)
            if (m.kind == k) return true;
        return false;
    }

    /// ||beta||^2 / n for the current dimensions.
    double signal_r2() const {
        if (!beta_prime_norm_sq) return signal.r2;
        double mass = 0.0;
        for (double a : signal.alpha) mass += a * a;
        return *beta_prime_norm_sq / static_cast<double>(ensemble.n) + mass;
    }
};

namespace detail {

inline std::string trim(std::string s) {
    boost::algorithm::trim(s);
    return s;
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> parts;
    boost::algorithm::split(parts, s, boost::algorithm::is_any_of(","));
    std::vector<std::string> out;
    for (auto& p : parts) {
        auto t = trim(p);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

inline double to_double(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' expects a number, got '" + s + "'");
    }
}

inline std::uint64_t to_uint(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        if (!s.empty() && s[0] == '-') throw std::invalid_argument(s);
        const auto v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' expects a nonnegative integer, got '" + s + "'");
    }
}

inline bool to_bool(const std::string& s, const std::string& key) {
    const auto v = boost::algorithm::to_lower_copy(s);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: '" + key + "' expects true/false, got '" + s + "'");
}

}  // namespace detail

/// "a..b" (inclusive), "top:k" (0..k-1), or a comma list; empty string gives {}.
inline std::vector<std::uint64_t> parse_uint_list(const std::string& text, const std::string& key) {
    std::vector<std::uint64_t> out;
    for (const auto& item : detail::split_list(text)) {
        if (item.rfind("top:", 0) == 0) {
            const auto k = detail::to_uint(item.substr(4), key);
            for (std::uint64_t i = 0; i < k; ++i) out.push_back(i);
        } else if (auto pos = item.find(".."); pos != std::string::npos) {
            const auto a = detail::to_uint(detail::trim(item.substr(0, pos)), key);
            const auto b = detail::to_uint(detail::trim(item.substr(pos + 2)), key);
            if (b < a) throw ConfigError("config: '" + key + "' has an empty range '" + item + "'");
            for (auto i = a; i <= b; ++i) out.push_back(i);
        } else {
            out.push_back(detail::to_uint(item, key));
        }
    }
    return out;
}

inline std::vector<std::size_t> parse_index_list(const std::string& text, const std::string& key) {
    std::vector<std::size_t> out;
    for (auto v : parse_uint_list(text, key)) out.push_back(static_cast<std::size_t>(v));
    return out;
}

/// "log:lo:hi:count", "linear:lo:hi:count", or a comma list of numbers.
inline std::vector<double> parse_grid(const std::string& text, const std::string& key) {
    const auto t = detail::trim(text);
    if (t.rfind("log:", 0) == 0 || t.rfind("linear:", 0) == 0) {
        std::vector<std::string> parts;
        boost::algorithm::split(parts, t, boost::algorithm::is_any_of(":"));
        if (parts.size() != 4) {
            throw ConfigError("config: '" + key + "' expects " + parts[0] + ":lo:hi:count");
        }
        const double lo = detail::to_double(detail::trim(parts[1]), key);
        const double hi = detail::to_double(detail::trim(parts[2]), key);
        const auto count = detail::to_uint(detail::trim(parts[3]), key);
        if (!(hi > lo) || count < 2 || !(lo > 0.0)) {
            throw ConfigError("config: '" + key + "' needs 0 < lo < hi and count >= 2");
        }
        if (parts[0] == "log") return log_grid(lo, hi, count);
        std::vector<double> g(count);
        for (std::size_t i = 0; i < count; ++i) {
            g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
        }
        return g;
    }
    std::vector<double> out;
    for (const auto& item : detail::split_list(t)) out.push_back(detail::to_double(item, key));
    return out;
}

inline std::vector<double> parse_number_list(const std::string& text, const std::string& key) {
    std::vector<double> out;
    for (const auto& item : detail::split_list(text)) out.push_back(detail::to_double(item, key));
    return out;
}

inline std::vector<MethodSpec> parse_methods(const std::string& text) {
    std::vector<MethodSpec> out;
    for (auto item : detail::split_list(text)) {
        boost::algorithm::to_lower(item);
        MethodSpec m;
        if (item == "roti_gcv") {
            m.kind = MethodKind::roti_gcv;
        } else if (item == "aroti_gcv") {
            m.kind = MethodKind::aroti_gcv;
        } else if (item == "gcv") {
            m.kind = MethodKind::gcv;
        } else if (item == "loocv") {
            m.kind = MethodKind::loocv;
        } else if (item.rfind("kfold", 0) == 0) {
            std::string k = item.substr(5);
            if (!k.empty() && k.front() == '(' && k.back() == ')') k = k.substr(1, k.size() - 2);
            m.kind = MethodKind::kfold;
            m.k = static_cast<std::size_t>(detail::to_uint(k.empty() ? "5" : k, "methods"));
        } else {
            throw ConfigError("config: unknown method '" + item + "'");
        }
        out.push_back(m);
    }
    return out;
}

namespace detail {

using Tree = boost::property_tree::ptree;

inline std::optional<std::string> get(const Tree& t, const std::string& path) {
    if (auto v = t.get_optional<std::string>(path)) return trim(*v);
    return std::nullopt;
}

inline void read_ensemble(const Tree& t, const std::string& section, EnsembleSpec& e) {
    if (auto v = get(t, section + ".family")) {
        try {
            e.family = parse_family(*v);
        } catch (const ArgumentError& err) {
            throw ConfigError(std::string("config: ") + err.what());
        }
    }
    if (auto v = get(t, section + ".n")) e.n = to_uint(*v, section + ".n");
    if (auto v = get(t, section + ".p")) e.p = to_uint(*v, section + ".p");
    auto& pr = e.params;
    if (auto v = get(t, section + ".rho")) pr.rho = to_double(*v, section + ".rho");
    if (auto v = get(t, section + ".nu")) pr.nu = to_double(*v, section + ".nu");
    if (auto v = get(t, section + ".spike_rank")) pr.spike_rank = to_uint(*v, section + ".spike_rank");
    if (auto v = get(t, section + ".spike_strength")) {
        pr.spike_strength = to_double(*v, section + ".spike_strength");
    }
    if (auto v = get(t, section + ".factors")) pr.factors = to_uint(*v, section + ".factors");
    if (auto v = get(t, section + ".inner_dim")) pr.inner_dim = to_uint(*v, section + ".inner_dim");
    if (auto v = get(t, section + ".mixture_mean")) {
        pr.mixture_mean = to_double(*v, section + ".mixture_mean");
    }
}

inline void require_sorted_positive(const std::vector<double>& g, const std::string& key) {
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(g[i] > 0.0)) throw ConfigError("config: '" + key + "' values must be > 0");
        if (i > 0 && !(g[i] > g[i - 1])) {
            throw ConfigError("config: '" + key + "' must be strictly increasing");
        }
    }
}

}  // namespace detail

/// Semantic checks shared by the parser and programmatic configs.
inline void validate(const ExperimentConfig& c) {
    if (c.methods.empty()) throw ConfigError("config: 'experiment.methods' is empty");
    if (c.n_noise_resamples < 1) throw ConfigError("config: 'experiment.n_noise_resamples' must be >= 1");
    if (c.seeds.empty()) throw ConfigError("config: 'experiment.seeds' is empty");
    if (c.lambda_sweep.empty()) throw ConfigError("config: 'grids.lambda_sweep' is empty");
    detail::require_sorted_positive(c.lambda_sweep, "grids.lambda_sweep");
    if (!c.estimation_grid.empty()) {
        if (c.estimation_grid.size() < 2) throw ConfigError("config: 'grids.estimation' needs >= 2 points");
        detail::require_sorted_positive(c.estimation_grid, "grids.estimation");
    }
    if (!(c.sigma2 >= 0.0)) throw ConfigError("config: 'noise.sigma2' must be >= 0");
    try {
        rotigcv::validate(c.ensemble);
        rotigcv::validate(c.test.ensemble);
        if (c.noise.kind == NoiseKind::student_t && c.noise.nu < 5.0) {
            throw ArgumentError("noise: student_t needs nu >= 5");
        }
    } catch (const ArgumentError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (c.test.ensemble.p != c.ensemble.p || c.test.ensemble.n != c.ensemble.n) {
        throw ConfigError("config: test ensemble must share the training n and p");
    }
    if (c.signal.aligned.size() != c.signal.alpha.size()) {
        throw ConfigError("config: 'signal.aligned' and 'signal.alpha' differ in length");
    }
    const std::size_t rank = std::min(c.ensemble.n, c.ensemble.p);
    for (auto i : c.signal.aligned) {
        if (i >= rank) throw ConfigError("config: 'signal.aligned' index " + std::to_string(i) + " >= min(n,p)");
    }
    for (auto i : c.test.coupled) {
        if (i >= rank) throw ConfigError("config: 'test.coupled' index " + std::to_string(i) + " >= min(n,p)");
    }
    if (c.test.mode == TestMode::coupled && c.test.coupled.empty()) {
        throw ConfigError("config: coupled test mode needs 'test.coupled'");
    }
    if (c.test.mode == TestMode::coupled && c.test.spike_draws < 1) {
        throw ConfigError("config: 'test.spike_draws' must be >= 1");
    }
    if (c.signal_r2() < 0.0) throw ConfigError("config: signal strength must be >= 0");
    double mass = 0.0;
    for (double a : c.signal.alpha) mass += a * a;
    if (mass > c.signal_r2() * (1.0 + 1e-12)) {
        throw ConfigError("config: infeasible signal, sum alpha^2 exceeds r2");
    }
    for (const auto& m : c.methods) {
        if (m.kind == MethodKind::kfold && (m.k < 2 || m.k > c.ensemble.n)) {
            throw ConfigError("config: kfold needs 2 <= k <= n");
        }
    }
}

inline ExperimentConfig parse_config_tree(const boost::property_tree::ptree& t) {
    using detail::get;
    ExperimentConfig c;
    if (auto v = get(t, "experiment.name")) c.name = *v;
    if (auto v = get(t, "experiment.methods")) c.methods = parse_methods(*v);
    if (auto v = get(t, "experiment.n_noise_resamples")) {
        c.n_noise_resamples = detail::to_uint(*v, "experiment.n_noise_resamples");
    }
    if (auto v = get(t, "experiment.seeds")) c.seeds = parse_uint_list(*v, "experiment.seeds");
    if (auto v = get(t, "experiment.normalize")) c.normalize = detail::to_bool(*v, "experiment.normalize");

    detail::read_ensemble(t, "ensemble", c.ensemble);
    if (c.ensemble.n == 0 || c.ensemble.p == 0) {
        throw ConfigError("config: 'ensemble.n' and 'ensemble.p' are required");
    }

    if (auto v = get(t, "signal.r2")) c.signal.r2 = detail::to_double(*v, "signal.r2");
    if (auto v = get(t, "signal.beta_prime_norm_sq")) {
        c.beta_prime_norm_sq = detail::to_double(*v, "signal.beta_prime_norm_sq");
    }
    if (auto v = get(t, "signal.aligned")) c.signal.aligned = parse_index_list(*v, "signal.aligned");
    if (auto v = get(t, "signal.alpha")) c.signal.alpha = parse_number_list(*v, "signal.alpha");

    if (auto v = get(t, "noise.sigma2")) c.sigma2 = detail::to_double(*v, "noise.sigma2");
    if (auto v = get(t, "noise.family")) {
        try {
            c.noise.kind = parse_noise_kind(*v);
        } catch (const ArgumentError& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
    if (auto v = get(t, "noise.nu")) c.noise.nu = detail::to_double(*v, "noise.nu");

    c.lambda_sweep = log_grid(0.1, 10.0, 20);
    if (auto v = get(t, "grids.lambda_sweep")) c.lambda_sweep = parse_grid(*v, "grids.lambda_sweep");
    if (auto v = get(t, "grids.estimation"); v && *v != "auto") {
        c.estimation_grid = parse_grid(*v, "grids.estimation");
    }
    if (auto v = get(t, "grids.regression")) {
        if (*v == "first_point") {
            c.regression = SnrRegression::first_point;
        } else if (*v == "centered") {
            c.regression = SnrRegression::centered;
        } else {
            throw ConfigError("config: 'grids.regression' must be first_point or centered");
        }
    }

    c.test.ensemble = c.ensemble;
    detail::read_ensemble(t, "test", c.test.ensemble);
    if (auto v = get(t, "test.mode")) {
        if (*v == "independent") {
            c.test.mode = TestMode::independent;
        } else if (*v == "coupled") {
            c.test.mode = TestMode::coupled;
        } else {
            throw ConfigError("config: 'test.mode' must be independent or coupled");
        }
    }
    if (auto v = get(t, "test.coupled")) c.test.coupled = parse_index_list(*v, "test.coupled");
    if (auto v = get(t, "test.spike_source")) {
        if (*v == "test") {
            c.test.spike_source = SpikeSource::test;
        } else if (*v == "train") {
            c.test.spike_source = SpikeSource::train;
        } else {
            throw ConfigError("config: 'test.spike_source' must be test or train");
        }
    }
    if (auto v = get(t, "test.spike_draws")) c.test.spike_draws = detail::to_uint(*v, "test.spike_draws");

    if (auto v = get(t, "aroti.aligned")) {
        if (*v == "signal") {
            c.aroti.source = AlignedSource::signal;
        } else if (*v == "none") {
            c.aroti.source = AlignedSource::none;
        } else if (*v == "heuristic") {
            c.aroti.source = AlignedSource::heuristic;
        } else {
            c.aroti.source = AlignedSource::list;
            c.aroti.aligned = parse_index_list(*v, "aroti.aligned");
        }
    }
    if (auto v = get(t, "aroti.z_threshold")) c.aroti.z_threshold = detail::to_double(*v, "aroti.z_threshold");

    validate(c);
    return c;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
    std::istringstream in(text);
    boost::property_tree::ptree t;
    try {
        boost::property_tree::ini_parser::read_ini(in, t);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return parse_config_tree(t);
}

inline ExperimentConfig load_config(const std::string& path) {
    boost::property_tree::ptree t;
    try {
        boost::property_tree::ini_parser::read_ini(path, t);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return parse_config_tree(t);
}

/// Shrink n and p by `factor` (at least 2 each); index sets are kept.
inline void apply_scale(ExperimentConfig& c, double factor) {
    if (!(factor > 0.0)) throw ConfigError("--scale must be > 0");
    auto shrink = [factor](std::size_t v) {
        return std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(static_cast<double>(v) * factor)));
    };
    c.ensemble.n = shrink(c.ensemble.n);
    c.ensemble.p = shrink(c.ensemble.p);
    c.test.ensemble.n = c.ensemble.n;
    c.test.ensemble.p = c.ensemble.p;
    validate(c);
}

}  // namespace rotigcv::harness

#endif  // ROTIGCV_HARNESS_CONFIG_HPP
