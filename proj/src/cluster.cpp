#include "percolab/cluster.hpp"

#include <algorithm>
#include <queue>

namespace percolab {

ClusterAnalysis analyze(const OpenView& view, const Window& window) {
  window.validate();
  ClusterAnalysis out;
  out.window = window;
  out.p = view.p;
  const int64_t n = window.vertex_count();
  const int dim = window.dim;
  const Coord hw = window.halfwidth();
  out.label.assign(size_t(n), -1);

  // Strides for unit steps in the flattened arena.
  std::array<int64_t, kMaxDim> stride;
  stride[0] = 1;
  for (int k = 1; k < dim; ++k) stride[k] = stride[k - 1] * window.side();

  std::vector<int64_t> queue;
  for (int64_t start = 0; start < n; ++start) {
    if (out.label[size_t(start)] >= 0) continue;
    int32_t comp = int32_t(out.comp_size.size());
    out.comp_size.push_back(0);
    std::array<Coord, kMaxDim> lo, hi;
    lo.fill(hw + 1);
    hi.fill(-hw - 1);
    queue.clear();
    queue.push_back(start);
    out.label[size_t(start)] = comp;
    size_t head = 0;
    while (head < queue.size()) {
      int64_t idx = queue[head++];
      ++out.comp_size[size_t(comp)];
      Vtx v = window.vertex_at(idx);
      for (int k = 0; k < dim; ++k) {
        lo[k] = std::min(lo[k], v[k]);
        hi[k] = std::max(hi[k], v[k]);
      }
      for (int k = 0; k < dim; ++k) {
        if (v[k] < hw) {
          Edge e{v, int8_t(k)};
          int64_t j = idx + stride[k];
          if (out.label[size_t(j)] < 0 && view.open(e)) {
            out.label[size_t(j)] = comp;
            queue.push_back(j);
          }
        }
        if (v[k] > -hw) {
          Vtx w = v;
          w[k] -= 1;
          Edge e{w, int8_t(k)};
          int64_t j = idx - stride[k];
          if (out.label[size_t(j)] < 0 && view.open(e)) {
            out.label[size_t(j)] = comp;
            queue.push_back(j);
          }
        }
      }
    }
    uint8_t cross = 0;
    for (int k = 0; k < dim; ++k) {
      if (lo[k] == -hw && hi[k] == hw) cross |= uint8_t(1u << k);
    }
    out.comp_cross.push_back(cross);
  }

  int64_t best = -1;
  int32_t best_id = -1;
  bool tie = false;
  for (size_t c = 0; c < out.comp_size.size(); ++c) {
    if (out.comp_size[c] > best) {
      best = out.comp_size[c];
      best_id = int32_t(c);
      tie = false;
    } else if (out.comp_size[c] == best) {
      tie = true;
    }
  }
  uint8_t all_axes = uint8_t((1u << dim) - 1);
  if (best_id >= 0 && !tie && out.comp_cross[size_t(best_id)] == all_axes) out.giant = best_id;
  return out;
}

std::optional<int64_t> chemical_distance(const OpenView& view, const Vtx& a, const Vtx& b,
                                         const Window& window) {
  if (!window.contains(a) || !window.contains(b))
    throw Error(Errc::precondition_failed, "chemical_distance: endpoints outside arena");
  if (a == b) return 0;
  const int dim = window.dim;
  const Coord hw = window.halfwidth();
  std::vector<int32_t> dist(size_t(window.vertex_count()), -1);
  std::array<int64_t, kMaxDim> stride;
  stride[0] = 1;
  for (int k = 1; k < dim; ++k) stride[k] = stride[k - 1] * window.side();
  std::vector<int64_t> queue{window.index_of(a)};
  dist[size_t(queue[0])] = 0;
  const int64_t target = window.index_of(b);
  size_t head = 0;
  while (head < queue.size()) {
    int64_t idx = queue[head++];
    int32_t d = dist[size_t(idx)];
    if (idx == target) return int64_t(d);
    Vtx v = window.vertex_at(idx);
    for (int k = 0; k < dim; ++k) {
      if (v[k] < hw) {
        Edge e{v, int8_t(k)};
        int64_t j = idx + stride[k];
        if (dist[size_t(j)] < 0 && view.open(e)) {
          dist[size_t(j)] = d + 1;
          queue.push_back(j);
        }
      }
      if (v[k] > -hw) {
        Vtx w = v;
        w[k] -= 1;
        Edge e{w, int8_t(k)};
        int64_t j = idx - stride[k];
        if (dist[size_t(j)] < 0 && view.open(e)) {
          dist[size_t(j)] = d + 1;
          queue.push_back(j);
        }
      }
    }
  }
  return std::nullopt;
}

// Enumerate the L1 sphere of radius r around x in lexicographic order and
// return the first giant vertex found on the smallest nonempty sphere.
static bool scan_sphere(const ClusterAnalysis& an, const Vtx& x, int64_t r, Vtx& out) {
  const int dim = an.window.dim;
  bool found = false;
  Vtx best{};
  Vtx v{};
  // Offsets per axis with |o_0|+...+|o_{dim-1}| = r, generated in lex order of the
  // resulting vertex (offsets scanned ascending per axis).
  struct Frame {
    int64_t rem;
    Coord o;
  };
  std::vector<Frame> st(static_cast<size_t>(dim));
  int k = 0;
  st[0] = {r, Coord(-r)};
  while (k >= 0) {
    Frame& f = st[size_t(k)];
    if (f.o > f.rem) {
      --k;
      if (k >= 0) ++st[size_t(k)].o;
      continue;
    }
    v[k] = x[k] + f.o;
    int64_t left = f.rem - std::abs(int64_t(f.o));
    if (k == dim - 2) {
      // Last axis is forced up to sign; check both candidates in ascending order.
      for (int s = -1; s <= 1; s += 2) {
        Coord oz = Coord(s * left);
        if (left == 0 && s == 1) break;
        v[dim - 1] = x[dim - 1] + oz;
        if (an.window.contains(v) && an.label[size_t(an.window.index_of(v))] == an.giant) {
          if (!found || lex_less(v, best, dim)) {
            best = v;
            found = true;
          }
        }
      }
      ++f.o;
    } else {
      ++k;
      st[size_t(k)] = {left, Coord(-left)};
    }
  }
  if (found) out = best;
  return found;
}

Vtx regularize(const Vtx& x, const ClusterAnalysis& analysis) {
  if (analysis.giant < 0) throw Error(Errc::no_giant, "regularize: analysis has no giant cluster");
  if (!analysis.window.contains(x))
    throw Error(Errc::precondition_failed, "regularize: point outside arena");
  const Coord hw = analysis.window.halfwidth();
  int64_t max_r = 0;
  for (int k = 0; k < analysis.window.dim; ++k)
    max_r += int64_t(hw) + std::abs(int64_t(x[k]));
  for (int64_t r = 0; r <= max_r; ++r) {
    Vtx out;
    if (scan_sphere(analysis, x, r, out)) return out;
    // Sphere fully outside the arena would mean the giant was missed: cannot
    // happen while r <= max_r, but guard the exit anyway.
  }
  throw Error(Errc::window_too_small, "regularize: no giant vertex inside arena");
}

Stat theta_estimate(double p, const Window& window, int64_t replicas, uint64_t seed) {
  int64_t hits = 0;
  Vtx origin{};
  for (int64_t r = 0; r < replicas; ++r) {
    EdgeField f{window, seed, uint64_t(r)};
    OpenView view{&f, p};
    ClusterAnalysis an = analyze(view, window);
    if (an.in_giant(origin)) ++hits;
  }
  return binomial_rate(hits, replicas);
}

}  // namespace percolab
