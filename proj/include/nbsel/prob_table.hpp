#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_set>
#include <vector>

#include "nbsel/errors.hpp"

namespace nbsel {

// Prior probabilities of the two classes. Class 1 is the class of interest
// ("disease"), so a prediction of class 1 counts as a positive test when the
// error is split into false positives and false negatives.
struct ClassPriors {
  double p1 = 0.5;
  double p2 = 0.5;
};

inline void validate(const ClassPriors& priors) {
  if (!(priors.p1 >= 0.0) || !(priors.p1 <= 1.0) ||
      !(priors.p2 >= 0.0) || !(priors.p2 <= 1.0)) {
    throw ValidationError("class priors must lie in [0, 1]");
  }
  if (std::abs(priors.p1 + priors.p2 - 1.0) > 1e-12) {
    throw ValidationError("class priors must sum to 1");
  }
}

// One binary feature: p1 = P(x = 1 | class 1), p2 = P(x = 1 | class 2).
struct Feature {
  std::string name;
  double p1 = 0.0;
  double p2 = 0.0;
};

// The whole input of the problem: per-feature conditional probabilities
// estimated by experts, one row per feature, two classes.
struct FeatureProbabilityTable {
  std::vector<Feature> features;

  std::size_t size() const { return features.size(); }
  const Feature& operator[](std::size_t i) const { return features[i]; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t find(const std::string& name) const {
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (features[i].name == name) return i;
    }
    return npos;
  }
};

inline void validate(const FeatureProbabilityTable& table) {
  if (table.features.empty()) {
    throw ValidationError("feature table must contain at least one feature");
  }
  std::unordered_set<std::string> seen;
  for (const Feature& f : table.features) {
    if (f.name.empty()) {
      throw ValidationError("feature names must be non-empty");
    }
    if (!seen.insert(f.name).second) {
      throw ValidationError("duplicate feature name: " + f.name);
    }
    if (!(f.p1 >= 0.0) || !(f.p1 <= 1.0) || !(f.p2 >= 0.0) || !(f.p2 <= 1.0)) {
      throw ValidationError("probability out of range for feature: " + f.name);
    }
  }
}

}  // namespace nbsel
