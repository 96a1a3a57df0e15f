#include "graphflow/error.hpp"

#include "graphflow/rng.hpp"

namespace graphflow {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse:
      return "parse";
    case ErrorKind::kValidation:
      return "validation";
    case ErrorKind::kNotFound:
      return "not_found";
    case ErrorKind::kInvalidArgument:
      return "invalid_argument";
    case ErrorKind::kNumerical:
      return "numerical";
    case ErrorKind::kBudgetExceeded:
      return "budget_exceeded";
    case ErrorKind::kIo:
      return "io";
  }
  return "unknown";
}

std::size_t sample_categorical(const std::vector<double>& probs, Rng& rng) {
  const double u = uniform01(rng);
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = i;
    cumulative += probs[i];
    if (u < cumulative) return i;
  }
  return last_positive;
}

}  // namespace graphflow
