// Open-cluster structure inside a window: components, crossings, chemical
// distance, and projection of points onto the giant cluster.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "percolab/field.hpp"
#include "percolab/lattice.hpp"
#include "percolab/stats.hpp"

namespace percolab {

struct ClusterAnalysis {
  Window window;
  double p = 0;
  std::vector<int32_t> label;       // component id per arena vertex index
  std::vector<int64_t> comp_size;   // per component
  std::vector<uint8_t> comp_cross;  // per component, bit k set = touches both faces of axis k
  int32_t giant = -1;               // unique largest component if it crosses every axis, else -1

  bool in_giant(const Vtx& v) const {
    return giant >= 0 && window.contains(v) && label[window.index_of(v)] == giant;
  }
};

ClusterAnalysis analyze(const OpenView& view, const Window& window);

// Hop count within the open subgraph of the arena; nullopt when unreachable.
std::optional<int64_t> chemical_distance(const OpenView& view, const Vtx& a, const Vtx& b,
                                         const Window& window);

// Nearest giant-cluster vertex in L1 distance, lexicographic tie-break.
// Throws no_giant when the analysis has none, window_too_small when the search
// would have to leave the arena.
Vtx regularize(const Vtx& x, const ClusterAnalysis& analysis);

// Fraction of replicas whose giant cluster contains the origin.
Stat theta_estimate(double p, const Window& window, int64_t replicas, uint64_t seed);

}  // namespace percolab
