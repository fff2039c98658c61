#ifndef ROTIGCV_ERRORS_HPP
#define ROTIGCV_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rotigcv {

/// Base class for every error raised by the library. `kind()` is a stable
/// machine-readable tag used in CLI error records.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

/// A real-valued argument is outside its mathematical domain (e.g. lambda <= 0).
struct DomainError : Error {
    explicit DomainError(const std::string& w) : Error("domain", w) {}
};

/// Structurally invalid arguments: bad sizes, indices, parameters.
struct ArgumentError : Error {
    explicit ArgumentError(const std::string& w) : Error("argument", w) {}
};

/// Only the combination r2*a + sigma2*b is estimable from the data.
struct IdentifiabilityError : Error {
    explicit IdentifiabilityError(const std::string& w) : Error("identifiability", w) {}
};

/// A CV denominator vanished (GCV trace >= n, LOOCV leverage -> 1).
struct DivergenceError : Error {
    explicit DivergenceError(const std::string& w) : Error("divergence", w) {}
};

struct DegenerateInputError : Error {
    explicit DegenerateInputError(const std::string& w) : Error("degenerate_input", w) {}
};

struct BackendError : Error {
    explicit BackendError(const std::string& w) : Error("backend", w) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error("config", w) {}
};

struct IoError : Error {
    explicit IoError(const std::string& w) : Error("io", w) {}
};

namespace detail {

inline void require_positive_lambda(double lambda, const char* where) {
    if (!(lambda > 0.0)) {
        throw DomainError(std::string(where) + ": lambda must be > 0, got " + std::to_string(lambda));
    }
}

}  // namespace detail
}  // namespace rotigcv

#endif  // ROTIGCV_ERRORS_HPP
