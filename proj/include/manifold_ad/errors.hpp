#ifndef MANIFOLD_AD_ERRORS_HPP
#define MANIFOLD_AD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace manifold_ad {

/// Malformed or inconsistent input (bad file, bad option, violated precondition).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed (non-finite objective, divergence, failed factorization).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace manifold_ad

#endif  // MANIFOLD_AD_ERRORS_HPP
