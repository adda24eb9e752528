// Planar isoperimetry: exact Cheeger constants on small clusters, Wulff shapes
// built from sampled norms by polar duality, and the variational constant the
// normalized shape certifies.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "percolab/cluster.hpp"
#include "percolab/field.hpp"
#include "percolab/lattice.hpp"

namespace percolab {

struct CheegerResult {
  double value = 0;           // best_boundary / best_size
  int64_t best_boundary = 0;  // open edges from the optimal A into its complement
  int64_t best_size = 0;
  int64_t minimizers = 0;  // subsets attaining the optimum, exact-ratio ties
  int64_t cluster_size = 0;
};

// Exact Cheeger constant of the designated cluster: the giant when present,
// otherwise the unique largest component. Enumerates connected subsets A with
// 2|A| <= |C|; ratios compared by cross multiplication. Throws too_large past
// the guard, degenerate when |C| < 2 or the largest component is tied.
CheegerResult cheeger_exact(const OpenView& view, const Window& window, int guard = 20);

// The enumeration lane behind cheeger_exact, over an explicit connected graph
// given as adjacency bitmasks (bit j of adj[i] set when i ~ j, 2..26 vertices).
CheegerResult cheeger_masks(const std::vector<uint64_t>& adj);

struct Vec2 {
  double x = 0, y = 0;
};

struct ConvexShape {
  std::vector<Vec2> vertices;  // counterclockwise, no repeats
  double area() const;
};

struct NormTable {
  std::vector<Vec2> directions;  // nonzero, not necessarily unit
  std::vector<double> values;    // norm of each direction, positive
  std::vector<double> stderrs;   // empty, or one per direction

  void validate() const;
};

struct WulffPair {
  ConvexShape W;      // {x : x.d_i <= value_i for every i}
  ConvexShape W_hat;  // W scaled to unit area
};

// Polar duality: W is the polar of the hull of d_i / value_i. Throws
// degenerate when the origin is not strictly inside that hull.
WulffPair wulff_shape(const NormTable& table);

// Support function h_W(v); the convex extension of the sampled norm.
double support(const ConvexShape& w, const Vec2& v);

// Boundary length of `shape` in the norm h_w: sum of h_w over edge vectors.
double len_beta(const ConvexShape& shape, const ConvexShape& w);

struct VariationalResult {
  WulffPair wulff;
  double len = 0;    // len_beta of the unit-area boundary
  double value = 0;  // len / (sqrt(2) * theta)
};

VariationalResult variational_cheeger(const NormTable& table, double theta);

// Hausdorff distance between convex polygons; vertices realize the maxima.
double hausdorff(const ConvexShape& a, const ConvexShape& b);

// Exact-arithmetic lane for rational inputs.
struct Rational {
  int64_t num = 0;
  int64_t den = 1;  // positive, reduced
};

Rational rat(int64_t num, int64_t den = 1);
Rational operator+(Rational a, Rational b);
Rational operator-(Rational a, Rational b);
Rational operator*(Rational a, Rational b);
Rational operator/(Rational a, Rational b);
bool rat_less(Rational a, Rational b);
inline bool rat_eq(Rational a, Rational b) { return a.num == b.num && a.den == b.den; }
inline double rat_double(Rational a) { return double(a.num) / double(a.den); }
std::optional<Rational> rat_sqrt(Rational a);  // exact root of a perfect square

struct RatVec2 {
  Rational x, y;
};

struct RationalWulff {
  std::vector<RatVec2> vertices;  // W, counterclockwise
  Rational area;
  bool hat_exact = false;             // area was a perfect rational square
  std::vector<RatVec2> hat_vertices;  // unit-area scaling, when exact
  Rational hat_len;                   // boundary length of W_hat in the table norm, when exact
};

RationalWulff wulff_shape_rational(const std::vector<RatVec2>& directions,
                                   const std::vector<Rational>& values);

}  // namespace percolab
