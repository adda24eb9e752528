#include "percolab/isoperimetry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>

namespace percolab {

CheegerResult cheeger_exact(const OpenView& view, const Window& window, int guard) {
  window.validate();
  if (guard < 1 || guard > 26) throw Error(Errc::bad_config, "cheeger_exact: guard in [1, 26]");
  ClusterAnalysis an = analyze(view, window);
  int32_t comp = an.giant;
  if (comp < 0) {
    int64_t best = -1;
    int ties = 0;
    for (size_t i = 0; i < an.comp_size.size(); ++i) {
      if (an.comp_size[i] > best) {
        best = an.comp_size[i];
        comp = int32_t(i);
        ties = 1;
      } else if (an.comp_size[i] == best) {
        ++ties;
      }
    }
    if (ties != 1)
      throw Error(Errc::degenerate, "cheeger_exact: largest component is not unique");
  }

  std::vector<Vtx> verts;
  for (int64_t idx = 0; idx < window.vertex_count(); ++idx) {
    if (an.label[size_t(idx)] == comp) verts.push_back(window.vertex_at(idx));
  }
  const int s = int(verts.size());
  CheegerResult out;
  out.cluster_size = s;
  if (s < 2) throw Error(Errc::degenerate, "cheeger_exact: cluster has fewer than 2 vertices");
  if (s > guard) throw Error(Errc::too_large, "cheeger_exact: cluster exceeds the guard");

  std::vector<uint64_t> adj(size_t(s), 0);
  for (int i = 0; i < s; ++i) {
    for (int j = i + 1; j < s; ++j) {
      if (norm_l1(verts[size_t(i)], verts[size_t(j)], window.dim) != 1) continue;
      if (!view.open(edge_between(verts[size_t(i)], verts[size_t(j)], window.dim))) continue;
      adj[size_t(i)] |= 1ull << j;
      adj[size_t(j)] |= 1ull << i;
    }
  }

  CheegerResult masks = cheeger_masks(adj);
  out.best_boundary = masks.best_boundary;
  out.best_size = masks.best_size;
  out.minimizers = masks.minimizers;
  out.value = masks.value;
  return out;
}

CheegerResult cheeger_masks(const std::vector<uint64_t>& adj) {
  const int s = int(adj.size());
  if (s < 2 || s > 26) throw Error(Errc::bad_config, "cheeger_masks: 2 to 26 vertices");
  CheegerResult out;
  out.cluster_size = s;
  int64_t best_b = -1, best_s = 1;
  const uint64_t full = (1ull << s) - 1;
  for (uint64_t m = 1; m <= full; ++m) {
    int pc = std::popcount(m);
    if (2 * pc > s) continue;
    uint64_t reach = m & (~m + 1), prev = 0;
    while (reach != prev) {
      prev = reach;
      for (uint64_t r = reach; r;) {
        int i = std::countr_zero(r);
        r &= r - 1;
        reach |= adj[size_t(i)] & m;
      }
    }
    if (reach != m) continue;
    int64_t b = 0;
    for (uint64_t r = m; r;) {
      int i = std::countr_zero(r);
      r &= r - 1;
      b += std::popcount(adj[size_t(i)] & ~m);
    }
    if (best_b < 0 || b * best_s < best_b * pc) {
      best_b = b;
      best_s = pc;
      out.minimizers = 1;
    } else if (b * best_s == best_b * pc) {
      ++out.minimizers;
    }
  }
  out.best_boundary = best_b;
  out.best_size = best_s;
  out.value = double(best_b) / double(best_s);
  return out;
}

double ConvexShape::area() const {
  double s = 0;
  for (size_t i = 0; i < vertices.size(); ++i) {
    const Vec2& a = vertices[i];
    const Vec2& b = vertices[(i + 1) % vertices.size()];
    s += a.x * b.y - a.y * b.x;
  }
  return 0.5 * s;
}

void NormTable::validate() const {
  if (directions.empty() || directions.size() != values.size())
    throw Error(Errc::bad_config, "norm table: directions and values must match and be nonempty");
  if (!stderrs.empty() && stderrs.size() != values.size())
    throw Error(Errc::bad_config, "norm table: stderrs must be empty or match values");
  for (const Vec2& d : directions) {
    if (d.x == 0 && d.y == 0) throw Error(Errc::bad_config, "norm table: zero direction");
  }
  for (double v : values) {
    if (!(v > 0) || !std::isfinite(v)) throw Error(Errc::bad_config, "norm table: values must be positive");
  }
  for (double e : stderrs) {
    if (!(e >= 0) || !std::isfinite(e)) throw Error(Errc::bad_config, "norm table: stderrs must be >= 0");
  }
}

namespace {

double cross3(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Strict monotone chain; collinear points are dropped.
std::vector<Vec2> hull_ccw(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  const size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<Vec2> h(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross3(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (size_t i = n - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross3(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

}  // namespace

WulffPair wulff_shape(const NormTable& table) {
  table.validate();
  std::vector<Vec2> q;
  q.reserve(table.directions.size());
  for (size_t i = 0; i < table.directions.size(); ++i) {
    const Vec2& d = table.directions[i];
    double v = table.values[i];
    q.push_back({d.x / v, d.y / v});
  }
  std::vector<Vec2> h = hull_ccw(std::move(q));
  if (h.size() < 3)
    throw Error(Errc::degenerate, "wulff_shape: directions do not surround the origin");
  for (size_t i = 0; i < h.size(); ++i) {
    const Vec2& a = h[i];
    const Vec2& b = h[(i + 1) % h.size()];
    if (!(a.x * b.y - a.y * b.x > 0))
      throw Error(Errc::degenerate, "wulff_shape: origin is not strictly inside the dual hull");
  }

  WulffPair out;
  for (size_t i = 0; i < h.size(); ++i) {
    const Vec2& a = h[i];
    const Vec2& b = h[(i + 1) % h.size()];
    double det = a.x * b.y - a.y * b.x;
    out.W.vertices.push_back({(b.y - a.y) / det, (a.x - b.x) / det});
  }
  double area = out.W.area();
  if (!(area > 0) || !std::isfinite(area))
    throw Error(Errc::degenerate, "wulff_shape: degenerate dual polygon");
  double scale = 1.0 / std::sqrt(area);
  for (const Vec2& v : out.W.vertices) out.W_hat.vertices.push_back({v.x * scale, v.y * scale});
  return out;
}

double support(const ConvexShape& w, const Vec2& v) {
  if (w.vertices.empty()) throw Error(Errc::precondition_failed, "support: empty shape");
  double best = w.vertices[0].x * v.x + w.vertices[0].y * v.y;
  for (const Vec2& u : w.vertices) best = std::max(best, u.x * v.x + u.y * v.y);
  return best;
}

double len_beta(const ConvexShape& shape, const ConvexShape& w) {
  if (shape.vertices.size() < 3)
    throw Error(Errc::precondition_failed, "len_beta: shape is not a polygon");
  double s = 0;
  for (size_t i = 0; i < shape.vertices.size(); ++i) {
    const Vec2& a = shape.vertices[i];
    const Vec2& b = shape.vertices[(i + 1) % shape.vertices.size()];
    s += support(w, {b.x - a.x, b.y - a.y});
  }
  return s;
}

VariationalResult variational_cheeger(const NormTable& table, double theta) {
  if (!(theta > 0) || theta > 1)
    throw Error(Errc::bad_config, "variational_cheeger: theta in (0, 1]");
  VariationalResult out;
  out.wulff = wulff_shape(table);
  out.len = len_beta(out.wulff.W_hat, out.wulff.W);
  out.value = out.len / (std::sqrt(2.0) * theta);
  return out;
}

namespace {

double point_seg_dist(const Vec2& p, const Vec2& a, const Vec2& b) {
  double dx = b.x - a.x, dy = b.y - a.y;
  double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0;
  t = std::clamp(t, 0.0, 1.0);
  double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
  return std::sqrt(ex * ex + ey * ey);
}

double point_poly_dist(const Vec2& p, const ConvexShape& s) {
  const size_t n = s.vertices.size();
  if (n == 0) throw Error(Errc::precondition_failed, "hausdorff: empty shape");
  if (n == 1) {
    double ex = s.vertices[0].x - p.x, ey = s.vertices[0].y - p.y;
    return std::sqrt(ex * ex + ey * ey);
  }
  bool inside = n >= 3;
  for (size_t i = 0; inside && i < n; ++i) {
    if (cross3(s.vertices[i], s.vertices[(i + 1) % n], p) < 0) inside = false;
  }
  if (inside) return 0;
  double best = kInf;
  for (size_t i = 0; i < n; ++i) {
    best = std::min(best, point_seg_dist(p, s.vertices[i], s.vertices[(i + 1) % n]));
  }
  return best;
}

double directed_hausdorff(const ConvexShape& a, const ConvexShape& b) {
  double m = 0;
  for (const Vec2& v : a.vertices) m = std::max(m, point_poly_dist(v, b));
  return m;
}

}  // namespace

double hausdorff(const ConvexShape& a, const ConvexShape& b) {
  return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

namespace {

__int128 gcd128(__int128 a, __int128 b) {
  while (b != 0) {
    __int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

Rational rat_norm(__int128 num, __int128 den) {
  if (den == 0) throw Error(Errc::bad_config, "rational: zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  __int128 g = gcd128(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  if (num == 0) den = 1;
  constexpr __int128 lo = INT64_MIN, hi = INT64_MAX;
  if (num < lo || num > hi || den > hi) throw Error(Errc::too_large, "rational: overflow");
  return Rational{int64_t(num), int64_t(den)};
}

}  // namespace

Rational rat(int64_t num, int64_t den) { return rat_norm(num, den); }

Rational operator+(Rational a, Rational b) {
  return rat_norm(__int128(a.num) * b.den + __int128(b.num) * a.den, __int128(a.den) * b.den);
}

Rational operator-(Rational a, Rational b) {
  return rat_norm(__int128(a.num) * b.den - __int128(b.num) * a.den, __int128(a.den) * b.den);
}

Rational operator*(Rational a, Rational b) {
  return rat_norm(__int128(a.num) * b.num, __int128(a.den) * b.den);
}

Rational operator/(Rational a, Rational b) {
  if (b.num == 0) throw Error(Errc::bad_config, "rational: division by zero");
  return rat_norm(__int128(a.num) * b.den, __int128(a.den) * b.num);
}

bool rat_less(Rational a, Rational b) { return __int128(a.num) * b.den < __int128(b.num) * a.den; }

namespace {

std::optional<int64_t> isqrt_exact(int64_t x) {
  if (x < 0) return std::nullopt;
  int64_t r = int64_t(std::llround(std::sqrt(double(x))));
  while (r > 0 && r * r > x) --r;
  while ((r + 1) * (r + 1) <= x) ++r;
  if (r * r != x) return std::nullopt;
  return r;
}

}  // namespace

std::optional<Rational> rat_sqrt(Rational a) {
  if (a.num < 0) return std::nullopt;
  auto sn = isqrt_exact(a.num);
  auto sd = isqrt_exact(a.den);
  if (!sn || !sd) return std::nullopt;
  return rat(*sn, *sd);
}

namespace {

Rational rcross3(const RatVec2& o, const RatVec2& a, const RatVec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool rvec_less(const RatVec2& a, const RatVec2& b) {
  if (!rat_eq(a.x, b.x)) return rat_less(a.x, b.x);
  return rat_less(a.y, b.y);
}

bool rvec_eq(const RatVec2& a, const RatVec2& b) { return rat_eq(a.x, b.x) && rat_eq(a.y, b.y); }

std::vector<RatVec2> hull_ccw_rational(std::vector<RatVec2> pts) {
  std::sort(pts.begin(), pts.end(), rvec_less);
  pts.erase(std::unique(pts.begin(), pts.end(), rvec_eq), pts.end());
  const size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<RatVec2> h(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {
    while (k >= 2 && rcross3(h[k - 2], h[k - 1], pts[i]).num <= 0) --k;
    h[k++] = pts[i];
  }
  for (size_t i = n - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && rcross3(h[k - 2], h[k - 1], pts[i]).num <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

Rational rdot(const RatVec2& a, const RatVec2& b) { return a.x * b.x + a.y * b.y; }

Rational rsupport(const std::vector<RatVec2>& w, const RatVec2& v) {
  Rational best = rdot(w[0], v);
  for (const RatVec2& u : w) {
    Rational d = rdot(u, v);
    if (rat_less(best, d)) best = d;
  }
  return best;
}

}  // namespace

RationalWulff wulff_shape_rational(const std::vector<RatVec2>& directions,
                                   const std::vector<Rational>& values) {
  if (directions.empty() || directions.size() != values.size())
    throw Error(Errc::bad_config, "wulff_shape_rational: directions and values must match");
  std::vector<RatVec2> q;
  q.reserve(directions.size());
  for (size_t i = 0; i < directions.size(); ++i) {
    if (directions[i].x.num == 0 && directions[i].y.num == 0)
      throw Error(Errc::bad_config, "wulff_shape_rational: zero direction");
    if (values[i].num <= 0)
      throw Error(Errc::bad_config, "wulff_shape_rational: values must be positive");
    q.push_back({directions[i].x / values[i], directions[i].y / values[i]});
  }
  std::vector<RatVec2> h = hull_ccw_rational(std::move(q));
  if (h.size() < 3)
    throw Error(Errc::degenerate, "wulff_shape_rational: directions do not surround the origin");
  RationalWulff out;
  for (size_t i = 0; i < h.size(); ++i) {
    const RatVec2& a = h[i];
    const RatVec2& b = h[(i + 1) % h.size()];
    Rational det = a.x * b.y - a.y * b.x;
    if (det.num <= 0)
      throw Error(Errc::degenerate, "wulff_shape_rational: origin is not strictly inside the dual hull");
    out.vertices.push_back({(b.y - a.y) / det, (a.x - b.x) / det});
  }
  Rational two_area = rat(0);
  for (size_t i = 0; i < out.vertices.size(); ++i) {
    const RatVec2& a = out.vertices[i];
    const RatVec2& b = out.vertices[(i + 1) % out.vertices.size()];
    two_area = two_area + (a.x * b.y - a.y * b.x);
  }
  out.area = two_area / rat(2);
  auto root = rat_sqrt(out.area);
  if (root) {
    out.hat_exact = true;
    Rational inv = rat(1) / *root;
    for (const RatVec2& v : out.vertices) out.hat_vertices.push_back({v.x * inv, v.y * inv});
    out.hat_len = rat(0);
    for (size_t i = 0; i < out.hat_vertices.size(); ++i) {
      const RatVec2& a = out.hat_vertices[i];
      const RatVec2& b = out.hat_vertices[(i + 1) % out.hat_vertices.size()];
      out.hat_len = out.hat_len + rsupport(out.vertices, {b.x - a.x, b.y - a.y});
    }
  }
  return out;
}

}  // namespace percolab
