// d=2 right-most paths: clockwise pivot fans, right-boundary edges, and the
// boundary distance found by least-cost search over dart states.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "percolab/cluster.hpp"
#include "percolab/field.hpp"
#include "percolab/lattice.hpp"
#include "percolab/stats.hpp"

namespace percolab {

// directions in clockwise order
inline constexpr int kEast = 0, kSouth = 1, kWest = 2, kNorth = 3;

Vtx dir_step(const Vtx& v, int dir);
int dir_between(const Vtx& from, const Vtx& to);  // requires a unit step
inline int reverse_dir(int dir) { return (dir + 2) & 3; }

// Directions strictly between the outgoing and the backward direction,
// sweeping clockwise; a U-turn sweeps the three remaining directions.
std::vector<int> pivot_fan(int dir_in, int dir_out);

struct BoundaryProfile {
  std::vector<Edge> boundary_edges;  // one entry per fan edge per pivot occurrence
  int64_t open_count = -1;           // filled when a view is supplied
};

BoundaryProfile right_boundary(const LatticePath& r);
BoundaryProfile right_boundary(const LatticePath& r, const OpenView& view);

// Dart-uniqueness plus: no traversed edge lies in the walk's right boundary.
bool is_rightmost(const LatticePath& r);

// Minimum number of open right-boundary edges over open dart walks x -> y
// staying inside the window. Fan edges are evaluated wherever they fall, the
// walk itself may not leave the window. nullopt when y is unreachable.
std::optional<int64_t> b_distance(const OpenView& view, const Vtx& x, const Vtx& y,
                                  const Window& window);

struct BetaEstimate {
  Vtx x;
  int64_t n = 0;
  double p = 0;
  double regularize_level = 0;  // cluster used for endpoint projection
  Stat at_n;                    // mean and stderr of b/n
  std::vector<double> per_replica;
  int64_t unreachable = 0;  // replicas whose projected endpoints the search missed
  Window window;
};

// Estimates the boundary-distance rate b(0~, nx~)/n over replicas. Endpoints
// are regularized onto the giant at regularize_level (the native p when
// absent), then measured in the p view.
BetaEstimate beta_estimate(double p, const Vtx& x, int64_t n, int64_t replicas,
                           uint64_t seed, const Window* window_override = nullptr,
                           std::optional<double> regularize_level = std::nullopt);

}  // namespace percolab
