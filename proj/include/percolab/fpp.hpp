// Travel times over a window: geodesics, cluster-regularized times, time-constant
// estimates, and truncation sweeps on coupled fields.
#pragma once

#include <cstdint>
#include <vector>

#include "percolab/cluster.hpp"
#include "percolab/field.hpp"
#include "percolab/stats.hpp"

namespace percolab {

struct TravelResult {
  double time = kInf;          // kInf = unreachable with finite time
  std::vector<Vtx> path;       // geodesic a..b when finite, certified by its edge sum
  bool hit_boundary = false;   // geodesic touches the arena boundary
};

// Infimum over arena paths of the left-to-right edge-time sum. Edges with
// infinite time are never traversed.
TravelResult travel_time(const TimeView& view, const Vtx& a, const Vtx& b, const Window& window);

// Full single-source pass; dist is indexed by window vertex index.
struct TimesFrom {
  std::vector<double> dist;
  std::vector<int64_t> parent;
};
TimesFrom times_from(const TimeView& view, const Vtx& src, const Window& window);

struct RegularizedResult {
  double time = kInf;
  Vtx a_proj{}, b_proj{};
  int64_t level_distance = -1;  // chemical distance between projections at level M
  bool hit_boundary = false;
};

// Travel time between the projections of a and b onto the giant cluster of
// the sublevel set {t(e) <= M}. Throws no_giant when that set has none.
RegularizedResult regularized_time(const TimeView& view, double M, const Vtx& a, const Vtx& b,
                                   const Window& window);

struct MuEstimate {
  Vtx x{};
  int64_t n = 0;
  double M = 0;
  Stat at_n;                        // mean/se of regularized time over n at scale n
  std::vector<double> per_replica;  // regularized time at scale n, divided by n
  double subadd_min = kInf;         // min over k <= n of (mean regularized time over k)
  int64_t flagged = 0;              // replicas whose geodesic still touched after one retry
  Window window;
};

// Monte Carlo estimate of the time constant in direction x at scale n. The
// window has radius n*|x|_inf; margin defaults to half of n*|x|_1 and doubles
// once for replicas whose geodesic touches the boundary.
MuEstimate mu_estimate(const DistributionSpec& law, double M, const Vtx& x, int64_t n,
                       int64_t replicas, uint64_t seed, const Window* window_override = nullptr);

struct TruncationRow {
  double K = 0;
  Stat stat;                        // regularized time over n
  std::vector<double> per_replica;  // raw regularized times at this K
};

struct TruncationSweep {
  std::vector<TruncationRow> rows;  // ascending K
  TruncationRow base;               // untruncated law
  TruncationRow majorant;           // infinite atom replaced by the largest K
  int64_t monotone_violations = 0;  // per-replica order breaches across K (exact check)
  int64_t flagged = 0;
};

// Shared-field truncation study: every K reuses the same replica field and the
// same level-M0 cluster projections, so per-replica monotonicity in K is exact.
TruncationSweep truncation_sweep(const DistributionSpec& law, double M0, const Vtx& x, int64_t n,
                                 const std::vector<double>& k_list, int64_t replicas, uint64_t seed);

}  // namespace percolab
