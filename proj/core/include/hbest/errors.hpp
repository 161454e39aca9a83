#pragma once

#include <stdexcept>
#include <string>

namespace hbest {

// Bad arguments or dimension mismatches. The CLI maps this onto exit code 2.
struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Inputs that are syntactically fine but carry no usable signal
// (constant series, zero-variance samples).
struct DegenerateInput : InvalidInput {
  using InvalidInput::InvalidInput;
};

// Numerical breakdown inside the sampler (non-finite grid weights, Cholesky
// failure of a Hessian that must be definite). Carries the MCMC iteration it
// occurred in (-1 when outside a chain) and a dump of the offending state.
// The CLI maps this onto exit code 3.
struct SamplerFailure : std::runtime_error {
  SamplerFailure(const std::string& what, long iteration = -1, std::string state_dump = {})
      : std::runtime_error(what), iteration(iteration), state_dump(std::move(state_dump)) {}
  long iteration;
  std::string state_dump;
};

}  // namespace hbest
