// Integer lattice geometry: vertices, canonical edges, finite windows, macro boxes.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "percolab/error.hpp"

namespace percolab {

using Coord = int32_t;

// Dimensions 2..4 are supported at runtime; coordinates beyond `dim` stay zero.
constexpr int kMaxDim = 4;

struct Vtx {
  std::array<Coord, kMaxDim> c{};

  Coord& operator[](int i) { return c[i]; }
  Coord operator[](int i) const { return c[i]; }
  bool operator==(const Vtx& o) const { return c == o.c; }
  bool operator!=(const Vtx& o) const { return c != o.c; }
};

inline Vtx make_vtx(Coord x, Coord y) { Vtx v; v.c[0] = x; v.c[1] = y; return v; }
inline Vtx make_vtx(Coord x, Coord y, Coord z) { Vtx v = make_vtx(x, y); v.c[2] = z; return v; }

// Lexicographic order on the first `dim` coordinates.
inline bool lex_less(const Vtx& a, const Vtx& b, int dim) {
  for (int k = 0; k < dim; ++k) {
    if (a[k] != b[k]) return a[k] < b[k];
  }
  return false;
}

inline int64_t norm_l1(const Vtx& a, const Vtx& b, int dim) {
  int64_t s = 0;
  for (int k = 0; k < dim; ++k) s += std::abs(int64_t(a[k]) - b[k]);
  return s;
}

inline double norm_l2(const Vtx& a, const Vtx& b, int dim) {
  double s = 0;
  for (int k = 0; k < dim; ++k) {
    double d = double(a[k]) - double(b[k]);
    s += d * d;
  }
  return std::sqrt(s);
}

inline int64_t norm_linf(const Vtx& a, const Vtx& b, int dim) {
  int64_t s = 0;
  for (int k = 0; k < dim; ++k) {
    int64_t d = std::abs(int64_t(a[k]) - b[k]);
    if (d > s) s = d;
  }
  return s;
}

// Canonical nearest-neighbor edge: `a` is the lexicographically smaller endpoint,
// the other endpoint is a + e_axis.
struct Edge {
  Vtx a;
  int8_t axis = 0;

  Vtx b() const {
    Vtx v = a;
    v[axis] += 1;
    return v;
  }
  bool operator==(const Edge& o) const { return axis == o.axis && a == o.a; }
};

// Edge between two adjacent vertices, in canonical orientation.
inline Edge edge_between(const Vtx& u, const Vtx& v, int dim) {
  for (int k = 0; k < dim; ++k) {
    Coord d = v[k] - u[k];
    if (d == 0) continue;
    if (d != 1 && d != -1) break;
    Edge e;
    e.a = (d == 1) ? u : v;
    e.axis = int8_t(k);
    Vtx other = (d == 1) ? v : u;
    if (norm_l1(e.a, other, dim) == 1) return e;
    break;
  }
  throw Error(Errc::precondition_failed, "edge_between: vertices are not lattice neighbors");
}

// Centered box [-radius, radius]^dim with a surrounding margin. Analyses run on
// the full arena [-(radius+margin), radius+margin]^dim; `radius` bounds the
// region of interest (targets, Cheeger boxes).
struct Window {
  int dim = 2;
  Coord radius = 0;
  Coord margin = 0;

  Coord halfwidth() const { return radius + margin; }
  int64_t side() const { return 2 * int64_t(halfwidth()) + 1; }

  int64_t vertex_count() const {
    int64_t n = 1;
    for (int k = 0; k < dim; ++k) n *= side();
    return n;
  }

  bool contains(const Vtx& v) const {
    for (int k = 0; k < dim; ++k) {
      if (v[k] < -halfwidth() || v[k] > halfwidth()) return false;
    }
    return true;
  }

  bool in_core(const Vtx& v) const {
    for (int k = 0; k < dim; ++k) {
      if (v[k] < -radius || v[k] > radius) return false;
    }
    return true;
  }

  // Mixed-radix flattening of arena vertices; axis 0 varies fastest.
  int64_t index_of(const Vtx& v) const {
    int64_t idx = 0;
    for (int k = dim - 1; k >= 0; --k) idx = idx * side() + (v[k] + halfwidth());
    return idx;
  }

  Vtx vertex_at(int64_t idx) const {
    Vtx v;
    for (int k = 0; k < dim; ++k) {
      v[k] = Coord(idx % side()) - halfwidth();
      idx /= side();
    }
    return v;
  }

  void validate() const {
    if (dim < 2 || dim > kMaxDim || radius < 0 || margin < 0)
      throw Error(Errc::bad_config, "window: dim in [2,4], radius/margin >= 0 required");
  }
};

inline int64_t floordiv(int64_t a, int64_t b) {
  int64_t q = a / b, r = a % b;
  return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

// Macro index of the unique N-box containing v: boxes i*(2N+1) + [-N,N]^d tile Z^d.
inline Vtx macro_index_of(const Vtx& v, int N, int dim) {
  Vtx i;
  for (int k = 0; k < dim; ++k) i[k] = Coord(floordiv(v[k] + N, 2 * int64_t(N) + 1));
  return i;
}

inline Vtx box_center(const Vtx& macro_idx, int N, int dim) {
  Vtx c;
  for (int k = 0; k < dim; ++k) c[k] = Coord(int64_t(macro_idx[k]) * (2 * N + 1));
  return c;
}

// v in B_N(i) (half = N) or in the enlarged B'_N(i) (half = 3N).
inline bool in_box(const Vtx& v, const Vtx& macro_idx, int N, int dim, int half) {
  Vtx c = box_center(macro_idx, N, dim);
  for (int k = 0; k < dim; ++k) {
    if (std::abs(int64_t(v[k]) - c[k]) > half) return false;
  }
  return true;
}

// Nearest-neighbor path as its vertex sequence; consecutive vertices differ by
// one unit step. A single vertex is a valid zero-length path.
struct LatticePath {
  std::vector<Vtx> v;

  int64_t length() const { return int64_t(v.size()) - 1; }

  void validate(int dim) const {
    if (v.empty()) throw Error(Errc::precondition_failed, "path: empty vertex sequence");
    for (size_t i = 1; i < v.size(); ++i) {
      if (norm_l1(v[i - 1], v[i], dim) != 1)
        throw Error(Errc::precondition_failed, "path: consecutive vertices must be neighbors");
    }
  }
};

// Set of macro indices, sorted lexicographically, duplicates removed.
struct LatticeAnimal {
  std::vector<Vtx> boxes;
  int64_t size() const { return int64_t(boxes.size()); }
  bool contains(const Vtx& idx, int dim) const;
};

LatticeAnimal path_animal(const LatticePath& path, int N, int dim);

// True if the index set is connected under shared-face adjacency.
bool animal_connected(const LatticeAnimal& a, int dim);

std::string vtx_str(const Vtx& v, int dim);

}  // namespace percolab
