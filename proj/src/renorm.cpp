#include "percolab/renorm.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace percolab {

namespace {

// Packs small lattice coordinates into a hashable key. 15 bits per axis plus
// room for an axis tag keeps everything in one uint64.
constexpr Coord kPackLimit = 16000;

uint64_t pack_vtx(const Vtx& v, int dim) {
  uint64_t key = 0;
  for (int k = 0; k < dim; ++k)
    key |= uint64_t(uint32_t(v.c[k] + kPackLimit) & 0x7fff) << (15 * k);
  return key;
}

uint64_t pack_edge(const Edge& e, int dim) {
  return (pack_vtx(e.a, dim) << 3) | uint64_t(e.axis);
}

// Dense scratch view of one enlarged box B' = center + [-3N, 3N]^d.
struct LocalBox {
  const EdgeField* field;
  int dim;
  Coord N;
  Vtx center;
  int64_t side;
  int64_t total;
  std::array<int64_t, kMaxDim> stride{};

  LocalBox(const EdgeField& f, int dim_, Coord N_, const Vtx& idx)
      : field(&f), dim(dim_), N(N_) {
    center = box_center(idx, N, dim);
    side = 6 * int64_t(N) + 1;
    total = 1;
    for (int k = 0; k < dim; ++k) {
      stride[k] = total;
      total *= side;
    }
  }
  int digit(int64_t id, int k) const { return int((id / stride[k]) % side); }
  Vtx vertex(int64_t id) const {
    Vtx v;
    for (int k = 0; k < dim; ++k) v.c[k] = center.c[k] - 3 * N + Coord(digit(id, k));
    return v;
  }
  // Visits neighbors flagged open in a prebuilt adjacency mask.
  template <class Fn>
  void for_adj(int64_t id, const std::vector<uint8_t>& adj, Fn&& fn) const {
    unsigned m = adj[size_t(id)];
    for (int k = 0; k < dim; ++k) {
      if (m & (1u << (2 * k))) fn(id + stride[k]);
      if (m & (1u << (2 * k + 1))) fn(id - stride[k]);
    }
  }
};

// Open-adjacency bitmask per vertex under one threshold: bit 2k is the +e_k
// edge, bit 2k+1 the -e_k edge. Each edge is hashed exactly once, so the
// floods below never touch the edge field again.
std::vector<uint8_t> build_adjacency(const LocalBox& bx, double thr) {
  std::vector<uint8_t> adj(size_t(bx.total), 0);
  for (int64_t id = 0; id < bx.total; ++id) {
    Vtx v = bx.vertex(id);
    for (int k = 0; k < bx.dim; ++k) {
      if (bx.digit(id, k) + 1 >= bx.side) continue;
      if (bx.field->u(Edge{v, int8_t(k)}) < thr) {
        adj[size_t(id)] |= uint8_t(1u << (2 * k));
        adj[size_t(id + bx.stride[k])] |= uint8_t(1u << (2 * k + 1));
      }
    }
  }
  return adj;
}

// Labels the components of the threshold graph; returns component sizes.
void threshold_components(const LocalBox& bx, const std::vector<uint8_t>& adj,
                          std::vector<int32_t>& label, std::vector<int64_t>& size) {
  label.assign(size_t(bx.total), -1);
  size.clear();
  std::vector<int64_t> queue;
  for (int64_t s = 0; s < bx.total; ++s) {
    if (label[size_t(s)] >= 0) continue;
    int32_t id = int32_t(size.size());
    size.push_back(0);
    label[size_t(s)] = id;
    queue.assign(1, s);
    while (!queue.empty()) {
      int64_t cur = queue.back();
      queue.pop_back();
      ++size[size_t(id)];
      bx.for_adj(cur, adj, [&](int64_t nb) {
        if (label[size_t(nb)] < 0) {
          label[size_t(nb)] = id;
          queue.push_back(nb);
        }
      });
    }
  }
}

// BFS hop distances from src inside the adjacency graph of the box.
void local_bfs(const LocalBox& bx, const std::vector<uint8_t>& adj, int64_t src,
               std::vector<int32_t>& dist) {
  dist.assign(size_t(bx.total), -1);
  dist[size_t(src)] = 0;
  std::vector<int64_t> queue{src};
  for (size_t h = 0; h < queue.size(); ++h) {
    int64_t cur = queue[h];
    int32_t dc = dist[size_t(cur)];
    bx.for_adj(cur, adj, [&](int64_t nb) {
      if (dist[size_t(nb)] < 0) {
        dist[size_t(nb)] = dc + 1;
        queue.push_back(nb);
      }
    });
  }
}

// Crossing test for one sub-box: digits per axis span [base_k, base_k + 2N].
// The cluster restricted to the sub-box must contain, for every axis, a
// component touching both opposite faces.
bool sub_box_crossed(const LocalBox& bx, const std::vector<uint8_t>& adj,
                     const std::vector<int32_t>& label, int32_t cbig,
                     const std::array<int, kMaxDim>& base, std::vector<int32_t>& stamp,
                     int32_t& stamp_gen) {
  int dim = bx.dim;
  int span = 2 * bx.N;
  auto inside = [&](int64_t id) {
    for (int k = 0; k < dim; ++k) {
      int dk = bx.digit(id, k);
      if (dk < base[size_t(k)] || dk > base[size_t(k)] + span) return false;
    }
    return true;
  };
  // Enumerate sub-box vertices via its own mixed radix.
  int64_t sub_total = 1;
  for (int k = 0; k < dim; ++k) sub_total *= (span + 1);
  std::vector<bool> axis_ok(size_t(dim), false);
  std::vector<int64_t> queue;
  for (int64_t s = 0; s < sub_total; ++s) {
    int64_t id = 0;
    int64_t rem = s;
    for (int k = 0; k < dim; ++k) {
      id += (base[size_t(k)] + rem % (span + 1)) * bx.stride[k];
      rem /= (span + 1);
    }
    if (label[size_t(id)] != cbig || stamp[size_t(id)] == stamp_gen) continue;
    // flood one component of cluster ∩ sub-box, tracking per-axis extrema
    std::array<int, kMaxDim> lo{}, hi{};
    for (int k = 0; k < dim; ++k) lo[size_t(k)] = span + 1, hi[size_t(k)] = -1;
    stamp[size_t(id)] = stamp_gen;
    queue.assign(1, id);
    while (!queue.empty()) {
      int64_t cur = queue.back();
      queue.pop_back();
      for (int k = 0; k < dim; ++k) {
        int dk = bx.digit(cur, k) - base[size_t(k)];
        lo[size_t(k)] = std::min(lo[size_t(k)], dk);
        hi[size_t(k)] = std::max(hi[size_t(k)], dk);
      }
      bx.for_adj(cur, adj, [&](int64_t nb) {
        if (label[size_t(nb)] == cbig && stamp[size_t(nb)] != stamp_gen && inside(nb)) {
          stamp[size_t(nb)] = stamp_gen;
          queue.push_back(nb);
        }
      });
    }
    for (int k = 0; k < dim; ++k)
      if (lo[size_t(k)] == 0 && hi[size_t(k)] == span) axis_ok[size_t(k)] = true;
  }
  ++stamp_gen;
  for (int k = 0; k < dim; ++k)
    if (!axis_ok[size_t(k)]) return false;
  return true;
}

// Far pairs of the cluster must be within hop bound. Exact: sources are
// processed by decreasing BFS level from the root; once every unprocessed
// vertex sits at level <= t with 2t <= bound, all remaining pairs are
// certified through the root by the triangle inequality. Rooting at the
// midpoint of a pseudo-diameter keeps levels near half the diameter, which
// certifies typical boxes without any per-source sweep.
bool far_pairs_ok(const LocalBox& bx, const std::vector<uint8_t>& adj,
                  const std::vector<int64_t>& cluster, int64_t bound) {
  if (cluster.size() < 2) return true;
  std::vector<int32_t> da, db, dist;
  local_bfs(bx, adj, cluster[0], da);
  int64_t a = cluster[0];
  for (int64_t v : cluster)
    if (da[size_t(v)] > da[size_t(a)]) a = v;
  local_bfs(bx, adj, a, da);
  int64_t b = a;
  for (int64_t v : cluster)
    if (da[size_t(v)] > da[size_t(b)]) b = v;
  local_bfs(bx, adj, b, db);
  int32_t diam = da[size_t(b)];
  int64_t root = a;
  int32_t best = diam;
  for (int64_t v : cluster) {
    if (da[size_t(v)] + db[size_t(v)] != diam) continue;
    int32_t off = std::abs(2 * da[size_t(v)] - diam);
    if (off < best) {
      best = off;
      root = v;
    }
  }
  local_bfs(bx, adj, root, dist);

  std::vector<Vtx> pos(cluster.size());
  for (size_t i = 0; i < cluster.size(); ++i) pos[i] = bx.vertex(cluster[i]);
  auto check_source = [&](size_t si, const std::vector<int32_t>& d) {
    const Vtx& vs = pos[si];
    for (size_t j = 0; j < cluster.size(); ++j) {
      if (norm_linf(vs, pos[j], bx.dim) < bx.N) continue;
      int32_t dy = d[size_t(cluster[j])];
      if (dy < 0 || dy > bound) return false;
    }
    return true;
  };
  size_t root_i = size_t(std::lower_bound(cluster.begin(), cluster.end(), root) - cluster.begin());
  if (!check_source(root_i, dist)) return false;

  std::vector<size_t> order;
  for (size_t i = 0; i < cluster.size(); ++i)
    if (2 * int64_t(dist[size_t(cluster[i])]) > bound) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](size_t i, size_t j) {
    int32_t di = dist[size_t(cluster[i])], dj = dist[size_t(cluster[j])];
    if (di != dj) return di > dj;
    return cluster[i] < cluster[j];
  });
  std::vector<int32_t> d2;
  for (size_t si : order) {
    local_bfs(bx, adj, cluster[si], d2);
    if (!check_source(si, d2)) return false;
  }
  return true;
}

}  // namespace

BoxClassification::BoxClassification(const EdgeField& field, const RenormParams& params,
                                     const Window& window)
    : field_(&field), par_(params), win_(window) {
  par_.validate();
  win_.validate();
  if (win_.halfwidth() >= kPackLimit)
    throw Error(Errc::bad_config, "window too large for packed keys");
  Coord hw = win_.halfwidth();
  Coord need = Coord(3) * Coord(par_.N);
  if (hw >= need) {
    irad_ = (hw - need) / Coord(2 * par_.N + 1);
    gside_ = 2 * int64_t(irad_) + 1;
    int64_t cells = 1;
    for (int k = 0; k < win_.dim; ++k) cells *= gside_;
    memo_.resize(size_t(cells));
  }
}

int64_t BoxClassification::grid_index(const Vtx& idx) const {
  int64_t id = 0;
  int64_t mul = 1;
  for (int k = 0; k < win_.dim; ++k) {
    id += (int64_t(idx.c[k]) + irad_) * mul;
    mul *= gside_;
  }
  return id;
}

bool BoxClassification::classifiable(const Vtx& idx) const {
  if (irad_ < 0) return false;
  for (int k = 0; k < win_.dim; ++k)
    if (idx.c[k] < -irad_ || idx.c[k] > irad_) return false;
  return true;
}

int64_t BoxClassification::grid_count() const {
  if (irad_ < 0) return 0;
  int64_t cells = 1;
  for (int k = 0; k < win_.dim; ++k) cells *= gside_;
  return cells;
}

std::unique_ptr<BoxInfo> BoxClassification::classify_box(const Vtx& idx) const {
  auto info = std::make_unique<BoxInfo>();
  LocalBox bx(*field_, win_.dim, Coord(par_.N), idx);

  std::vector<uint8_t> adj = build_adjacency(bx, par_.p0);
  std::vector<int32_t> label;
  std::vector<int64_t> size;
  threshold_components(bx, adj, label, size);

  int32_t cbig = -1;
  int big_count = 0;
  for (size_t c = 0; c < size.size(); ++c)
    if (size[c] > par_.N) {
      cbig = int32_t(c);
      ++big_count;
    }
  info->unique_big = (big_count == 1);
  if (!info->unique_big) return info;

  std::vector<int64_t> cluster;
  cluster.reserve(size_t(size[size_t(cbig)]));
  for (int64_t v = 0; v < bx.total; ++v)
    if (label[size_t(v)] == cbig) cluster.push_back(v);

  // (ii) the 3^d sub-boxes with digit bases in {0, 2N, 4N} per axis
  std::vector<int32_t> stamp(size_t(bx.total), -1);
  int32_t stamp_gen = 0;
  info->crossings = true;
  int64_t combos = 1;
  for (int k = 0; k < win_.dim; ++k) combos *= 3;
  for (int64_t c = 0; c < combos && info->crossings; ++c) {
    std::array<int, kMaxDim> base{};
    int64_t rem = c;
    for (int k = 0; k < win_.dim; ++k) {
      base[size_t(k)] = int(rem % 3) * 2 * par_.N;
      rem /= 3;
    }
    info->crossings = sub_box_crossed(bx, adj, label, cbig, base, stamp, stamp_gen);
  }

  int64_t bound = int64_t(3.0 * par_.beta * par_.N + 1e-9);
  info->diameter_ok = far_pairs_ok(bx, adj, cluster, bound);

  // (iv) every q-component avoiding the cluster must have <= N vertices;
  // the cluster itself sits inside exactly one q-component.
  std::vector<uint8_t> qadj = build_adjacency(bx, par_.q);
  std::vector<int32_t> qlabel;
  std::vector<int64_t> qsize;
  threshold_components(bx, qadj, qlabel, qsize);
  int32_t qc = qlabel[size_t(cluster[0])];
  info->small_leftover = true;
  for (size_t c = 0; c < qsize.size(); ++c)
    if (int32_t(c) != qc && qsize[c] > par_.N) {
      info->small_leftover = false;
      break;
    }

  info->good = info->unique_big && info->crossings && info->diameter_ok && info->small_leftover;
  if (info->good) {
    info->cluster.reserve(cluster.size());
    for (int64_t v : cluster) info->cluster.push_back(win_.index_of(bx.vertex(v)));
    std::sort(info->cluster.begin(), info->cluster.end());
  }
  return info;
}

const BoxInfo& BoxClassification::box(const Vtx& idx) {
  if (!classifiable(idx))
    throw Error(Errc::window_too_small, "macro box " + vtx_str(idx, win_.dim) +
                                            " has no fully contained enlarged box");
  auto& slot = memo_[size_t(grid_index(idx))];
  if (!slot) slot = classify_box(idx);
  return *slot;
}

void BoxClassification::classify_all(int workers) {
  if (irad_ < 0) throw Error(Errc::window_too_small, "no classifiable macro box");
  std::vector<Vtx> todo;
  int64_t cells = grid_count();
  for (int64_t id = 0; id < cells; ++id) {
    if (memo_[size_t(id)]) continue;
    Vtx idx;
    int64_t rem = id;
    for (int k = 0; k < win_.dim; ++k) {
      idx.c[k] = Coord(rem % gside_) - irad_;
      rem /= gside_;
    }
    todo.push_back(idx);
  }
  if (todo.empty()) return;
  int nw = std::max(1, workers);
  if (nw == 1) {
    for (const Vtx& idx : todo) memo_[size_t(grid_index(idx))] = classify_box(idx);
    return;
  }
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      memo_[size_t(grid_index(todo[i]))] = classify_box(todo[i]);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < nw; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
}

bool BoxClassification::vertex_in_cluster(const Vtx& idx, const Vtx& v) {
  const BoxInfo& info = box(idx);
  if (!info.good) return false;
  if (!in_box(v, idx, par_.N, win_.dim, Coord(3 * par_.N))) return false;
  int64_t key = win_.index_of(v);
  return std::binary_search(info.cluster.begin(), info.cluster.end(), key);
}

const ClusterAnalysis& BoxClassification::giant_analysis() {
  if (!giant_) {
    OpenView view{field_, par_.p0};
    giant_ = std::make_unique<ClusterAnalysis>(analyze(view, win_));
  }
  return *giant_;
}

double BoxClassification::good_fraction() {
  classify_all();
  int64_t cells = grid_count();
  int64_t good = 0;
  for (int64_t id = 0; id < cells; ++id)
    if (memo_[size_t(id)]->good) ++good;
  return double(good) / double(cells);
}

namespace {

std::vector<Vtx> face_neighbors(const Vtx& idx, int dim) {
  std::vector<Vtx> out;
  for (int k = 0; k < dim; ++k)
    for (int s : {-1, 1}) {
      Vtx nb = idx;
      nb.c[k] += Coord(s);
      out.push_back(nb);
    }
  return out;
}

BadComponent flood_bad(BoxClassification& cls, const Vtx& seed) {
  int dim = cls.window().dim;
  BadComponent comp;
  std::unordered_set<uint64_t> seen{pack_vtx(seed, dim)};
  std::unordered_set<uint64_t> boundary_seen;
  std::vector<Vtx> stack{seed};
  comp.boxes.push_back(seed);
  while (!stack.empty()) {
    Vtx cur = stack.back();
    stack.pop_back();
    for (const Vtx& nb : face_neighbors(cur, dim)) {
      if (!cls.classifiable(nb)) {
        comp.truncated = true;
        continue;
      }
      if (cls.box(nb).good) {
        if (boundary_seen.insert(pack_vtx(nb, dim)).second) comp.boundary.push_back(nb);
        continue;
      }
      if (seen.insert(pack_vtx(nb, dim)).second) {
        comp.boxes.push_back(nb);
        stack.push_back(nb);
      }
    }
  }
  auto lex = [dim](const Vtx& a, const Vtx& b) { return lex_less(a, b, dim); };
  std::sort(comp.boxes.begin(), comp.boxes.end(), lex);
  std::sort(comp.boundary.begin(), comp.boundary.end(), lex);
  return comp;
}

}  // namespace

BadComponent flood_bad_component(BoxClassification& cls, const Vtx& seed) {
  if (cls.box(seed).good) return BadComponent{{}, {seed}, false};
  return flood_bad(cls, seed);
}

std::vector<BadComponent> bad_components(BoxClassification& cls) {
  cls.classify_all();
  int dim = cls.window().dim;
  Coord irad = cls.irad();
  std::vector<BadComponent> out;
  std::unordered_set<uint64_t> done;
  Vtx idx;
  std::function<void(int)> scan = [&](int axis) {
    if (axis == dim) {
      if (cls.box(idx).good || done.count(pack_vtx(idx, dim))) return;
      BadComponent comp = flood_bad(cls, idx);
      for (const Vtx& b : comp.boxes) done.insert(pack_vtx(b, dim));
      out.push_back(std::move(comp));
      return;
    }
    for (Coord c = -irad; c <= irad; ++c) {
      idx.c[axis] = c;
      scan(axis + 1);
    }
  };
  scan(0);
  return out;
}

RouteResult route_in_good_region(BoxClassification& cls, const Vtx& a, const Vtx& b,
                                 const std::vector<Vtx>& good_boxes) {
  const Window& win = cls.window();
  int dim = win.dim;
  Coord N = Coord(cls.params().N);
  if (good_boxes.empty()) throw Error(Errc::precondition_failed, "route: empty good set");
  for (const Vtx& i : good_boxes)
    if (!cls.box(i).good) throw Error(Errc::precondition_failed, "route: box not good");

  std::vector<Vtx> sorted(good_boxes);
  auto lex = [dim](const Vtx& x, const Vtx& y) { return lex_less(x, y, dim); };
  std::sort(sorted.begin(), sorted.end(), lex);
  auto in_region = [&](const Vtx& v) {
    Vtx m = macro_index_of(v, N, dim);
    // candidate boxes i with |i - m|_inf <= 1 can contain v in their enlarged box
    Vtx cand;
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = (dim > 2 ? -1 : 0); dz <= (dim > 2 ? 1 : 0); ++dz)
          for (int dw = (dim > 3 ? -1 : 0); dw <= (dim > 3 ? 1 : 0); ++dw) {
            cand = m;
            cand.c[0] += Coord(dx);
            cand.c[1] += Coord(dy);
            if (dim > 2) cand.c[2] += Coord(dz);
            if (dim > 3) cand.c[3] += Coord(dw);
            if (!std::binary_search(sorted.begin(), sorted.end(), cand, lex)) continue;
            if (in_box(v, cand, N, dim, 3 * N)) return true;
          }
    return false;
  };
  if (!in_region(a) || !in_region(b))
    throw Error(Errc::precondition_failed, "route: endpoint outside region");

  const EdgeField& field = cls.field();
  double p0 = cls.params().p0;
  int64_t total = win.vertex_count();
  std::vector<int32_t> parent(size_t(total), -2);
  int32_t src = int32_t(win.index_of(a));
  int32_t dst = int32_t(win.index_of(b));
  parent[size_t(src)] = -1;
  std::vector<int32_t> queue{src};
  for (size_t h = 0; h < queue.size() && parent[size_t(dst)] == -2; ++h) {
    int32_t cur = queue[h];
    Vtx v = win.vertex_at(cur);
    for (int k = 0; k < dim; ++k)
      for (int s : {-1, 1}) {
        Vtx w = v;
        w.c[k] += Coord(s);
        if (!win.contains(w)) continue;
        int32_t wid = int32_t(win.index_of(w));
        if (parent[size_t(wid)] != -2) continue;
        Edge e = edge_between(v, w, dim);
        if (field.u(e) >= p0) continue;
        if (!in_region(w)) continue;
        parent[size_t(wid)] = cur;
        queue.push_back(wid);
      }
  }
  if (parent[size_t(dst)] == -2)
    throw Error(Errc::routing_failed, "route: no p0-open path in good region");
  RouteResult res;
  for (int32_t cur = dst; cur != -1; cur = parent[size_t(cur)])
    res.path.push_back(win.vertex_at(cur));
  std::reverse(res.path.begin(), res.path.end());
  double denom = double(N) * double(good_boxes.size());
  double nd = 1;
  for (int k = 0; k < dim; ++k) nd *= double(N);
  denom += nd;
  res.length_bound_ratio = double(res.path.size() - 1) / denom;
  return res;
}

bool spans_grid(BoxClassification& cls, const Vtx& start) {
  if (cls.irad() < 0) throw Error(Errc::window_too_small, "no classifiable macro box");
  int dim = cls.window().dim;
  Coord irad = cls.irad();
  if (!cls.box(start).good) return false;

  std::unordered_set<uint64_t> seen{pack_vtx(start, dim)};
  std::vector<Vtx> stack{start};
  std::vector<bool> face(size_t(2 * dim), false);
  auto touch = [&](const Vtx& i) {
    for (int k = 0; k < dim; ++k) {
      if (i.c[k] == irad) face[size_t(2 * k)] = true;
      if (i.c[k] == -irad) face[size_t(2 * k + 1)] = true;
    }
  };
  touch(start);
  auto all_faces = [&] {
    for (bool f : face)
      if (!f) return false;
    return true;
  };
  while (!stack.empty() && !all_faces()) {
    Vtx cur = stack.back();
    stack.pop_back();
    for (const Vtx& nb : face_neighbors(cur, dim)) {
      if (!cls.classifiable(nb) || seen.count(pack_vtx(nb, dim))) continue;
      if (!cls.box(nb).good) continue;
      seen.insert(pack_vtx(nb, dim));
      touch(nb);
      stack.push_back(nb);
    }
  }
  return all_faces();
}

SurgeryReport modify_path(BoxClassification& cls, const LatticePath& gamma) {
  const Window& win = cls.window();
  const RenormParams& par = cls.params();
  const EdgeField& field = cls.field();
  int dim = win.dim;
  Coord N = Coord(par.N);

  gamma.validate(dim);
  if (gamma.v.empty()) throw Error(Errc::precondition_failed, "surgery: empty path");
  for (const Vtx& v : gamma.v)
    if (!win.contains(v)) throw Error(Errc::precondition_failed, "surgery: path leaves window");
  for (size_t t = 1; t < gamma.v.size(); ++t) {
    Edge e = edge_between(gamma.v[t - 1], gamma.v[t], dim);
    if (field.u(e) >= par.q) throw Error(Errc::precondition_failed, "surgery: path not q-open");
  }

  const ClusterAnalysis& giant = cls.giant_analysis();
  if (giant.giant < 0) throw Error(Errc::no_giant, "surgery: no crossing giant at p0");
  if (!giant.in_giant(gamma.v.front()) || !giant.in_giant(gamma.v.back()))
    throw Error(Errc::precondition_failed, "surgery: endpoint not in p0 giant");

  Vtx iy = macro_index_of(gamma.v.front(), N, dim);
  Vtx iz = macro_index_of(gamma.v.back(), N, dim);
  if (!cls.box(iy).good || !cls.box(iz).good)
    throw Error(Errc::precondition_failed, "surgery: endpoint box not good");

  SurgeryReport rep;
  rep.input = gamma;

  for (size_t t = 1; t < gamma.v.size(); ++t) {
    Edge e = edge_between(gamma.v[t - 1], gamma.v[t], dim);
    if (field.u(e) >= par.p) ++rep.closed_count;
  }

  LatticeAnimal animal = path_animal(gamma, par.N, dim);
  rep.animal_size = int64_t(animal.boxes.size());
  for (const Vtx& b : animal.boxes)
    if (!cls.classifiable(b))
      throw Error(Errc::window_too_small, "surgery: path animal leaves classifiable grid");

  // distinct bad components meeting the path animal
  std::unordered_map<uint64_t, size_t> comp_of;
  std::vector<BadComponent> comps;
  auto component_at = [&](const Vtx& b) -> const BadComponent& {
    auto it = comp_of.find(pack_vtx(b, dim));
    if (it == comp_of.end()) {
      BadComponent comp = flood_bad(cls, b);
      if (comp.truncated)
        throw Error(Errc::window_too_small, "surgery: bad component reaches grid edge");
      size_t id = comps.size();
      for (const Vtx& m : comp.boxes) comp_of.emplace(pack_vtx(m, dim), id);
      comps.push_back(std::move(comp));
      it = comp_of.find(pack_vtx(b, dim));
    }
    return comps[it->second];
  };
  {
    std::unordered_set<size_t> counted;
    for (const Vtx& b : animal.boxes) {
      if (cls.box(b).good) continue;
      const BadComponent& comp = component_at(b);
      size_t id = comp_of[pack_vtx(b, dim)];
      if (counted.insert(id).second) rep.bad_mass += int64_t(comp.boxes.size());
    }
  }

  std::vector<Vtx> cur = gamma.v;
  int64_t guard = rep.closed_count + 1;
  for (;;) {
    size_t first_closed = 0;
    for (size_t t = 1; t < cur.size(); ++t) {
      Edge e = edge_between(cur[t - 1], cur[t], dim);
      if (field.u(e) >= par.p) {
        first_closed = t;
        break;
      }
    }
    if (first_closed == 0) break;
    if (--guard < 0) throw Error(Errc::routing_failed, "surgery: no progress");

    Edge seed_edge = edge_between(cur[first_closed - 1], cur[first_closed], dim);
    Vtx seed_box = macro_index_of(seed_edge.a, N, dim);
    if (!cls.classifiable(seed_box))
      throw Error(Errc::window_too_small, "surgery: closed edge outside classifiable grid");

    // surface: the box itself when good, else the boundary of its bad component
    std::vector<Vtx> surface;
    std::unordered_set<uint64_t> marked_boxes;
    if (cls.box(seed_box).good) {
      surface.push_back(seed_box);
      marked_boxes.insert(pack_vtx(seed_box, dim));
    } else {
      const BadComponent& comp = component_at(seed_box);
      surface = comp.boundary;
      if (surface.empty())
        throw Error(Errc::window_too_small, "surgery: bad component without good boundary");
      for (const Vtx& m : comp.boxes) marked_boxes.insert(pack_vtx(m, dim));
      for (const Vtx& m : comp.boundary) marked_boxes.insert(pack_vtx(m, dim));
    }

    // span of the surface along the current path: positions whose box is
    // marked, plus both endpoints of every p-closed edge seeded in it
    size_t alpha = cur.size(), omega = 0;
    auto mark = [&](size_t k) {
      alpha = std::min(alpha, k);
      omega = std::max(omega, k);
    };
    for (size_t k = 0; k < cur.size(); ++k)
      if (marked_boxes.count(pack_vtx(macro_index_of(cur[k], N, dim), dim))) mark(k);
    for (size_t t = 1; t < cur.size(); ++t) {
      Edge e = edge_between(cur[t - 1], cur[t], dim);
      if (field.u(e) < par.p) continue;
      if (marked_boxes.count(pack_vtx(macro_index_of(e.a, N, dim), dim))) {
        mark(t - 1);
        mark(t);
      }
    }
    if (alpha > omega) throw Error(Errc::routing_failed, "surgery: empty surface span");

    auto in_surface_cluster = [&](const Vtx& v) {
      for (const Vtx& i : surface)
        if (cls.vertex_in_cluster(i, v)) return true;
      return false;
    };
    std::optional<size_t> entry, exit_;
    for (size_t k = alpha + 1; k-- > 0;)
      if (in_surface_cluster(cur[k])) {
        entry = k;
        break;
      }
    for (size_t k = omega; k < cur.size(); ++k)
      if (in_surface_cluster(cur[k])) {
        exit_ = k;
        break;
      }
    if (!entry) throw Error(Errc::routing_failed, "surgery: no entry contact with surface clusters");
    if (!exit_) throw Error(Errc::routing_failed, "surgery: no exit contact with surface clusters");

    RouteResult route = route_in_good_region(cls, cur[*entry], cur[*exit_], surface);
    std::vector<Vtx> next(cur.begin(), cur.begin() + int64_t(*entry) + 1);
    next.insert(next.end(), route.path.begin() + 1, route.path.end());
    next.insert(next.end(), cur.begin() + int64_t(*exit_) + 1, cur.end());
    cur = std::move(next);
    ++rep.surfaces;
  }

  // loop erasure: first-visit truncation makes the output vertex-simple
  std::vector<Vtx> out;
  std::unordered_map<uint64_t, size_t> pos;
  for (const Vtx& v : cur) {
    uint64_t key = pack_vtx(v, dim);
    auto it = pos.find(key);
    if (it != pos.end()) {
      while (out.size() > it->second + 1) {
        pos.erase(pack_vtx(out.back(), dim));
        out.pop_back();
      }
    } else {
      pos.emplace(key, out.size());
      out.push_back(v);
    }
  }

  for (size_t t = 1; t < out.size(); ++t) {
    Edge e = edge_between(out[t - 1], out[t], dim);
    if (field.u(e) >= par.p)
      throw Error(Errc::routing_failed, "surgery: p-closed edge survived rebuild");
  }

  std::unordered_set<uint64_t> input_edges;
  for (size_t t = 1; t < gamma.v.size(); ++t)
    input_edges.insert(pack_edge(edge_between(gamma.v[t - 1], gamma.v[t], dim), dim));
  for (size_t t = 1; t < out.size(); ++t)
    if (!input_edges.count(pack_edge(edge_between(out[t - 1], out[t], dim), dim)))
      ++rep.added_edges;

  rep.output.v = std::move(out);
  double nd = 1;
  for (int k = 0; k < dim; ++k) nd *= double(N);
  double denom = double(N) * double(rep.bad_mass) + nd * double(rep.closed_count);
  rep.bound_ratio = denom > 0 ? double(rep.added_edges) / denom : 0.0;
  return rep;
}

std::string SurgeryReport::to_json() const {
  nlohmann::json j;
  j["input_length"] = input.length();
  j["output_length"] = output.length();
  j["closed_count"] = closed_count;
  j["bad_mass"] = bad_mass;
  j["animal_size"] = animal_size;
  j["added_edges"] = added_edges;
  j["surfaces"] = surfaces;
  j["bound_ratio"] = bound_ratio;
  return j.dump();
}

}  // namespace percolab
