// Edge-indexed uniform variables: a pure keyed hash of (seed, replica, edge),
// so values are reproducible in any evaluation order and across window sizes.
#pragma once

#include <cstdint>

#include "percolab/dist.hpp"
#include "percolab/lattice.hpp"

namespace percolab {

inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

struct EdgeField {
  Window window;
  uint64_t seed = 0;
  uint64_t replica = 0;

  // u(e) in (0,1), independent of window placement.
  double u(const Edge& e) const {
    uint64_t h = mix64(seed);
    h = mix64(h ^ replica);
    for (int k = 0; k < window.dim; ++k) h = mix64(h ^ uint64_t(int64_t(e.a[k])));
    h = mix64(h ^ uint64_t(e.axis));
    return (double(h >> 11) + 0.5) * 0x1p-53;
  }
};

// p-open means u(e) < p strictly; p = 1 opens every edge.
struct OpenView {
  const EdgeField* field = nullptr;
  double p = 0;

  bool open(const Edge& e) const { return field->u(e) < p; }
};

// Passage time t(e) = hat_inverse(law, u(e)).
struct TimeView {
  const EdgeField* field = nullptr;
  const DistributionSpec* law = nullptr;

  double time(const Edge& e) const { return hat_inverse(*law, field->u(e)); }

  // The sublevel set {t(e) <= M} equals {u(e) < cdf(law, M)} for atomic laws.
  OpenView level_view(double M) const { return OpenView{field, cdf(*law, M)}; }
};

}  // namespace percolab
