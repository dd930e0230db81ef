#ifndef SBTK_ERRORS_HPP_
#define SBTK_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace sbtk {

// Invalid arguments or malformed model configuration.
class DomainError : public std::invalid_argument {
 public:
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

// Numerical failure (factorization breakdown, quadrature non-convergence, ...).
// The message carries the diagnostics available at the failure site.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sbtk

#endif  // SBTK_ERRORS_HPP_
