#pragma once

#include <cmath>
#include <numbers>

#include "nbsel/errors.hpp"
#include "nbsel/rng.hpp"

namespace nbsel {

// One standard normal deviate via plain Box-Muller. Deliberately not the
// cached-pair variant: every call consumes exactly two uniforms, so a stream
// stays reproducible regardless of call sites.
template <class Rng>
double standard_normal(Rng& rng) {
  const double u1 = 1.0 - uniform_unit(rng);  // (0, 1], keeps the log finite
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Normal(mean, stddev) truncated to [lo, hi] by rejection: resample until the
// draw lands inside. Clamping instead would pile mass on the ends and shift
// the mean. With mean inside [lo, hi] the acceptance rate is at least the
// central band mass, so the loop terminates quickly for any practical stddev.
template <class Rng>
double truncated_normal(Rng& rng, double mean, double stddev, double lo = 0.0,
                        double hi = 1.0) {
  if (!(stddev >= 0.0)) throw ValidationError("stddev must be >= 0");
  if (!(lo <= hi)) throw ValidationError("empty truncation interval");
  if (stddev == 0.0) {
    if (mean < lo || mean > hi) throw ValidationError("mean outside the truncation interval");
    return mean;
  }
  while (true) {
    const double x = mean + stddev * standard_normal(rng);
    if (x >= lo && x <= hi) return x;
  }
}

}  // namespace nbsel
