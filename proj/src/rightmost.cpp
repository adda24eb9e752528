#include "percolab/rightmost.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

namespace percolab {

namespace {

constexpr Coord kDx[4] = {1, 0, -1, 0};
constexpr Coord kDy[4] = {0, -1, 0, 1};

}  // namespace

Vtx dir_step(const Vtx& v, int dir) {
  Vtx w = v;
  w[0] += kDx[dir & 3];
  w[1] += kDy[dir & 3];
  return w;
}

int dir_between(const Vtx& from, const Vtx& to) {
  if (from[2] != to[2] || from[3] != to[3])
    throw Error(Errc::precondition_failed, "dir_between: step leaves the plane");
  int64_t dx = int64_t(to[0]) - from[0], dy = int64_t(to[1]) - from[1];
  for (int d = 0; d < 4; ++d) {
    if (dx == kDx[d] && dy == kDy[d]) return d;
  }
  throw Error(Errc::precondition_failed, "dir_between: not a unit step");
}

std::vector<int> pivot_fan(int dir_in, int dir_out) {
  int back = reverse_dir(dir_in);
  int steps = (back - dir_out) & 3;
  if (steps == 0) steps = 4;  // U-turn sweeps every other direction
  std::vector<int> fan;
  for (int j = 1; j < steps; ++j) fan.push_back((dir_out + j) & 3);
  return fan;
}

BoundaryProfile right_boundary(const LatticePath& r) {
  r.validate(2);
  BoundaryProfile out;
  for (size_t t = 1; t + 1 < r.v.size(); ++t) {
    int din = dir_between(r.v[t - 1], r.v[t]);
    int dout = dir_between(r.v[t], r.v[t + 1]);
    for (int f : pivot_fan(din, dout))
      out.boundary_edges.push_back(edge_between(r.v[t], dir_step(r.v[t], f), 2));
  }
  return out;
}

BoundaryProfile right_boundary(const LatticePath& r, const OpenView& view) {
  BoundaryProfile out = right_boundary(r);
  out.open_count = 0;
  for (const Edge& e : out.boundary_edges) {
    if (view.open(e)) ++out.open_count;
  }
  return out;
}

namespace {

using EdgeKey = std::array<int64_t, 3>;

EdgeKey edge_key(const Edge& e) { return {e.a[0], e.a[1], e.axis}; }

}  // namespace

bool is_rightmost(const LatticePath& r) {
  r.validate(2);
  std::set<EdgeKey> traversed;
  std::set<std::array<int64_t, 3>> darts;
  for (size_t t = 1; t < r.v.size(); ++t) {
    int d = dir_between(r.v[t - 1], r.v[t]);
    if (!darts.insert({r.v[t - 1][0], r.v[t - 1][1], d}).second) return false;
    traversed.insert(edge_key(edge_between(r.v[t - 1], r.v[t], 2)));
  }
  for (const Edge& e : right_boundary(r).boundary_edges) {
    if (traversed.count(edge_key(e))) return false;
  }
  return true;
}

namespace {

struct DartItem {
  int64_t d;
  int64_t s;
  bool operator>(const DartItem& o) const { return d > o.d || (d == o.d && s > o.s); }
};

// Least-cost search over dart states (vertex, incoming direction). A transition
// from din to dout at vertex v pays the open fan edges at that pivot; the first
// step out of x and the arrival at y pay nothing. Unrolling a repeated dart
// never raises the cost, so the optimum ranges over dart-unique walks.
std::optional<int64_t> dart_search(const OpenView& view, const Vtx& x, const Vtx& y,
                                   const Window& window, bool* touched) {
  if (touched) *touched = false;
  if (x == y) return 0;
  const int64_t yidx = window.index_of(y);
  const Coord hw = window.halfwidth();

  auto fan_cost = [&](const Vtx& v, int din, int dout) {
    int back = reverse_dir(din);
    int steps = (back - dout) & 3;
    if (steps == 0) steps = 4;
    int64_t c = 0;
    for (int j = 1; j < steps; ++j) {
      int f = (dout + j) & 3;
      if (view.open(edge_between(v, dir_step(v, f), 2))) ++c;
    }
    return c;
  };

  std::vector<int64_t> dist(size_t(window.vertex_count()) * 4, -1);
  std::vector<int64_t> parent(dist.size(), -1);
  std::priority_queue<DartItem, std::vector<DartItem>, std::greater<DartItem>> heap;
  for (int d0 = 0; d0 < 4; ++d0) {
    Vtx w = dir_step(x, d0);
    if (!window.contains(w)) continue;
    if (!view.open(edge_between(x, w, 2))) continue;
    int64_t s = window.index_of(w) * 4 + d0;
    dist[size_t(s)] = 0;
    heap.push({0, s});
  }
  std::vector<char> settled(dist.size(), 0);
  while (!heap.empty()) {
    DartItem it = heap.top();
    heap.pop();
    if (settled[size_t(it.s)]) continue;
    settled[size_t(it.s)] = 1;
    int64_t vi = it.s >> 2;
    int din = int(it.s & 3);
    Vtx v = window.vertex_at(vi);
    if (vi == yidx) {
      if (touched) {
        for (int64_t s = it.s; s >= 0; s = parent[size_t(s)]) {
          Vtx w = window.vertex_at(s >> 2);
          if (std::abs(int64_t(w[0])) == hw || std::abs(int64_t(w[1])) == hw) {
            *touched = true;
            break;
          }
        }
      }
      return it.d;
    }
    for (int dout = 0; dout < 4; ++dout) {
      Vtx w = dir_step(v, dout);
      if (!window.contains(w)) continue;
      if (!view.open(edge_between(v, w, 2))) continue;
      int64_t s2 = window.index_of(w) * 4 + dout;
      if (settled[size_t(s2)]) continue;
      int64_t cand = it.d + fan_cost(v, din, dout);
      if (dist[size_t(s2)] < 0 || cand < dist[size_t(s2)]) {
        dist[size_t(s2)] = cand;
        parent[size_t(s2)] = it.s;
        heap.push({cand, s2});
      }
    }
  }
  return std::nullopt;
}

Window default_window(const Vtx& x, int64_t n) {
  int64_t linf = 0, l1 = 0;
  for (int k = 0; k < 2; ++k) {
    linf = std::max<int64_t>(linf, std::abs(int64_t(x[k])));
    l1 += std::abs(int64_t(x[k]));
  }
  Window w;
  w.dim = 2;
  w.radius = Coord(n * linf);
  w.margin = Coord((n * l1 + 1) / 2);
  return w;
}

}  // namespace

std::optional<int64_t> b_distance(const OpenView& view, const Vtx& x, const Vtx& y,
                                  const Window& window) {
  window.validate();
  if (window.dim != 2) throw Error(Errc::bad_config, "b_distance: planar windows only");
  if (!window.contains(x) || !window.contains(y))
    throw Error(Errc::precondition_failed, "b_distance: endpoints outside arena");
  return dart_search(view, x, y, window, nullptr);
}

BetaEstimate beta_estimate(double p, const Vtx& x, int64_t n, int64_t replicas, uint64_t seed,
                           const Window* window_override, std::optional<double> regularize_level) {
  if (n < 1 || replicas < 1) throw Error(Errc::bad_config, "beta_estimate: n, replicas >= 1");
  if (!(p > 0) || p > 1) throw Error(Errc::bad_config, "beta_estimate: p in (0, 1]");
  Window base_win = window_override ? *window_override : default_window(x, n);
  base_win.validate();
  if (base_win.dim != 2) throw Error(Errc::bad_config, "beta_estimate: planar windows only");
  double level = regularize_level ? *regularize_level : p;

  BetaEstimate out;
  out.x = x;
  out.n = n;
  out.p = p;
  out.regularize_level = level;
  out.window = base_win;

  for (int64_t rep = 0; rep < replicas; ++rep) {
    std::optional<int64_t> b;
    for (int attempt = 0; attempt < 2; ++attempt) {
      Window win = base_win;
      if (attempt == 1) win.margin = Coord(win.margin * 2 + 1);
      EdgeField f{win, seed, uint64_t(rep)};
      OpenView pv{&f, p};
      ClusterAnalysis an = analyze(OpenView{&f, level}, win);
      if (an.giant < 0) {
        if (attempt == 0) continue;
        throw Error(Errc::no_giant, "beta_estimate: no giant cluster at the regularize level");
      }
      Vtx origin{};
      Vtx target;
      for (int k = 0; k < 2; ++k) target[k] = Coord(n * int64_t(x[k]));
      Vtx a = regularize(origin, an);
      Vtx bp = regularize(target, an);
      bool touch = false;
      b = dart_search(pv, a, bp, win, &touch);
      if (b && !touch) break;
      if (attempt == 1) break;
    }
    if (!b) {
      ++out.unreachable;
      continue;
    }
    out.per_replica.push_back(double(*b) / double(n));
  }

  out.at_n = mean_se(out.per_replica);
  return out;
}

}  // namespace percolab
