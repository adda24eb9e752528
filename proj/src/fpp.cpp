#include "percolab/fpp.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace percolab {

namespace {

struct HeapItem {
  double d;
  int64_t v;
  bool operator>(const HeapItem& o) const { return d > o.d || (d == o.d && v > o.v); }
};

// Dijkstra with left-fold sums: cand = dist[u] + t(e). Both monotonicity of
// float addition and nonnegative times make the fold exact against path
// enumeration in the same order.
TimesFrom dijkstra(const TimeView& view, const Vtx& src, const Window& window, int64_t stop_at) {
  const int dim = window.dim;
  const Coord hw = window.halfwidth();
  TimesFrom out;
  out.dist.assign(size_t(window.vertex_count()), kInf);
  out.parent.assign(size_t(window.vertex_count()), -1);
  std::array<int64_t, kMaxDim> stride;
  stride[0] = 1;
  for (int k = 1; k < dim; ++k) stride[k] = stride[k - 1] * window.side();

  std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<HeapItem>> heap;
  int64_t s = window.index_of(src);
  out.dist[size_t(s)] = 0;
  heap.push({0, s});
  std::vector<char> settled(size_t(window.vertex_count()), 0);
  while (!heap.empty()) {
    HeapItem it = heap.top();
    heap.pop();
    if (settled[size_t(it.v)]) continue;
    settled[size_t(it.v)] = 1;
    if (it.v == stop_at) break;
    Vtx v = window.vertex_at(it.v);
    for (int k = 0; k < dim; ++k) {
      for (int sgn = -1; sgn <= 1; sgn += 2) {
        Coord c = v[k];
        if (sgn > 0 ? c >= hw : c <= -hw) continue;
        Edge e;
        if (sgn > 0) {
          e = Edge{v, int8_t(k)};
        } else {
          Vtx w = v;
          w[k] -= 1;
          e = Edge{w, int8_t(k)};
        }
        double t = view.time(e);
        if (t == kInf) continue;
        int64_t j = it.v + sgn * stride[k];
        if (settled[size_t(j)]) continue;
        double cand = it.d + t;
        if (cand < out.dist[size_t(j)]) {
          out.dist[size_t(j)] = cand;
          out.parent[size_t(j)] = it.v;
          heap.push({cand, j});
        }
      }
    }
  }
  return out;
}

bool on_boundary(const Vtx& v, const Window& window) {
  for (int k = 0; k < window.dim; ++k) {
    if (std::abs(int64_t(v[k])) == window.halfwidth()) return true;
  }
  return false;
}

std::vector<Vtx> reconstruct(const TimesFrom& tf, const Window& window, int64_t target) {
  std::vector<Vtx> path;
  int64_t cur = target;
  while (cur >= 0) {
    path.push_back(window.vertex_at(cur));
    cur = tf.parent[size_t(cur)];
  }
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace

TravelResult travel_time(const TimeView& view, const Vtx& a, const Vtx& b, const Window& window) {
  window.validate();
  if (!window.contains(a) || !window.contains(b))
    throw Error(Errc::precondition_failed, "travel_time: endpoints outside arena");
  TravelResult r;
  int64_t target = window.index_of(b);
  TimesFrom tf = dijkstra(view, a, window, target);
  r.time = tf.dist[size_t(target)];
  if (r.time != kInf) {
    r.path = reconstruct(tf, window, target);
    for (const Vtx& v : r.path) {
      if (on_boundary(v, window)) {
        r.hit_boundary = true;
        break;
      }
    }
  }
  return r;
}

TimesFrom times_from(const TimeView& view, const Vtx& src, const Window& window) {
  window.validate();
  if (!window.contains(src))
    throw Error(Errc::precondition_failed, "times_from: source outside arena");
  return dijkstra(view, src, window, -1);
}

RegularizedResult regularized_time(const TimeView& view, double M, const Vtx& a, const Vtx& b,
                                   const Window& window) {
  OpenView level = view.level_view(M);
  ClusterAnalysis an = analyze(level, window);
  if (an.giant < 0)
    throw Error(Errc::no_giant, "regularized_time: no giant cluster at the requested level");
  RegularizedResult r;
  r.a_proj = regularize(a, an);
  r.b_proj = regularize(b, an);
  auto d = chemical_distance(level, r.a_proj, r.b_proj, window);
  r.level_distance = d ? *d : -1;
  TravelResult t = travel_time(view, r.a_proj, r.b_proj, window);
  r.time = t.time;
  r.hit_boundary = t.hit_boundary;
  return r;
}

namespace {

Window default_window(const Vtx& x, int64_t n, int dim) {
  int64_t linf = 0, l1 = 0;
  for (int k = 0; k < dim; ++k) {
    linf = std::max<int64_t>(linf, std::abs(int64_t(x[k])));
    l1 += std::abs(int64_t(x[k]));
  }
  Window w;
  w.dim = dim;
  w.radius = Coord(n * linf);
  w.margin = Coord((n * l1 + 1) / 2);
  return w;
}

}  // namespace

MuEstimate mu_estimate(const DistributionSpec& law, double M, const Vtx& x, int64_t n,
                       int64_t replicas, uint64_t seed, const Window* window_override) {
  if (n < 1 || replicas < 1) throw Error(Errc::bad_config, "mu_estimate: n, replicas >= 1");
  int dim = window_override ? window_override->dim : 2;
  Window base_win = window_override ? *window_override : default_window(x, n, dim);
  base_win.validate();
  double p_level = cdf(law, M);
  if (!(p_level > 0)) throw Error(Errc::bad_config, "mu_estimate: law has no mass at [0, M]");

  MuEstimate out;
  out.x = x;
  out.n = n;
  out.M = M;
  out.window = base_win;
  std::vector<std::vector<double>> per_k(static_cast<size_t>(n));  // per scale, per replica

  for (int64_t rep = 0; rep < replicas; ++rep) {
    bool flagged = false;
    std::vector<double> vals;
    for (int attempt = 0; attempt < 2; ++attempt) {
      Window win = base_win;
      if (attempt == 1) win.margin = Coord(win.margin * 2 + 1);
      EdgeField f{win, seed, uint64_t(rep)};
      TimeView tv{&f, &law};
      OpenView level = tv.level_view(M);
      ClusterAnalysis an = analyze(level, win);
      if (an.giant < 0) {
        if (attempt == 0) continue;
        throw Error(Errc::no_giant, "mu_estimate: no giant cluster at level M");
      }
      Vtx origin{};
      Vtx o_proj = regularize(origin, an);
      TimesFrom tf = times_from(tv, o_proj, win);
      vals.assign(size_t(n), kInf);
      bool touch = false;
      for (int64_t k = 1; k <= n; ++k) {
        Vtx target;
        for (int kk = 0; kk < win.dim; ++kk) target[kk] = Coord(k * int64_t(x[kk]));
        Vtx t_proj = regularize(target, an);
        vals[size_t(k - 1)] = tf.dist[size_t(win.index_of(t_proj))];
        if (k == n) {
          std::vector<Vtx> geo = reconstruct(tf, win, win.index_of(t_proj));
          for (const Vtx& v : geo) {
            if (on_boundary(v, win)) {
              touch = true;
              break;
            }
          }
        }
      }
      if (!touch || attempt == 1) {
        flagged = touch;
        break;
      }
    }
    if (flagged) ++out.flagged;
    for (int64_t k = 1; k <= n; ++k) per_k[size_t(k - 1)].push_back(vals[size_t(k - 1)]);
    out.per_replica.push_back(vals[size_t(n - 1)] / double(n));
  }

  out.at_n = mean_se(out.per_replica);
  for (int64_t k = 1; k <= n; ++k) {
    Stat s = mean_se(per_k[size_t(k - 1)]);
    out.subadd_min = std::min(out.subadd_min, s.mean / double(k));
  }
  return out;
}

namespace {

DistributionSpec finite_majorant(const DistributionSpec& law, double k_max) {
  std::vector<Atom> atoms;
  for (const Atom& a : law.atoms) {
    if (a.value == kInf)
      atoms.push_back({k_max, a.weight});
    else
      atoms.push_back(a);
  }
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.value < b.value; });
  std::vector<Atom> merged;
  for (const Atom& a : atoms) {
    if (!merged.empty() && merged.back().value == a.value)
      merged.back().weight += a.weight;
    else
      merged.push_back(a);
  }
  return make_law(std::move(merged), "majorant");
}

}  // namespace

TruncationSweep truncation_sweep(const DistributionSpec& law, double M0, const Vtx& x, int64_t n,
                                 const std::vector<double>& k_list, int64_t replicas,
                                 uint64_t seed) {
  if (k_list.empty()) throw Error(Errc::bad_config, "truncation_sweep: empty K list");
  std::vector<double> ks = k_list;
  std::sort(ks.begin(), ks.end());
  if (ks.front() < M0)
    throw Error(Errc::bad_config, "truncation_sweep: K values must be >= M0");
  double p0 = cdf(law, M0);
  if (!(p0 > 0)) throw Error(Errc::bad_config, "truncation_sweep: law has no mass at [0, M0]");

  TruncationSweep out;
  std::vector<DistributionSpec> trunc;
  for (double K : ks) {
    trunc.push_back(truncate(law, K));
    TruncationRow row;
    row.K = K;
    out.rows.push_back(row);
  }
  DistributionSpec maj = finite_majorant(law, ks.back());
  out.base.K = kInf;
  out.majorant.K = ks.back();

  Window base_win = default_window(x, n, 2);
  for (int64_t rep = 0; rep < replicas; ++rep) {
    Window win = base_win;
    std::vector<double> kt(ks.size(), kInf);
    double bt = kInf, mt = kInf;
    for (int attempt = 0; attempt < 2; ++attempt) {
      if (attempt == 1) win.margin = Coord(win.margin * 2 + 1);
      EdgeField f{win, seed, uint64_t(rep)};
      TimeView tv_base{&f, &law};
      OpenView level = tv_base.level_view(M0);
      ClusterAnalysis an = analyze(level, win);
      if (an.giant < 0) {
        if (attempt == 0) continue;
        throw Error(Errc::no_giant, "truncation_sweep: no giant cluster at level M0");
      }
      Vtx origin{};
      Vtx target;
      for (int kk = 0; kk < win.dim; ++kk) target[kk] = Coord(n * int64_t(x[kk]));
      Vtx a = regularize(origin, an);
      Vtx b = regularize(target, an);
      bool touch = false;
      for (size_t i = 0; i < ks.size(); ++i) {
        TimeView tv{&f, &trunc[i]};
        TravelResult r = travel_time(tv, a, b, win);
        kt[i] = r.time;
        if (i + 1 == ks.size() && r.hit_boundary) touch = true;
      }
      bt = travel_time(tv_base, a, b, win).time;
      mt = travel_time(TimeView{&f, &maj}, a, b, win).time;
      if (!touch || attempt == 1) {
        if (touch) ++out.flagged;
        break;
      }
    }
    for (size_t i = 0; i < ks.size(); ++i) out.rows[i].per_replica.push_back(kt[i]);
    out.base.per_replica.push_back(bt);
    out.majorant.per_replica.push_back(mt);
    for (size_t i = 1; i < ks.size(); ++i) {
      if (kt[i - 1] > kt[i]) ++out.monotone_violations;
    }
    if (kt.back() > mt) ++out.monotone_violations;
    if (kt.back() > bt) ++out.monotone_violations;
  }

  for (TruncationRow& row : out.rows) row.stat = mean_se(row.per_replica);
  out.base.stat = mean_se(out.base.per_replica);
  out.majorant.stat = mean_se(out.majorant.per_replica);
  return out;
}

}  // namespace percolab
