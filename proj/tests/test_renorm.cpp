// Block classification, bad-component surfaces, good-region routing, and path
// surgery. Component structure is cross-checked against an independent flood
// written here, and surgery reports are re-derived from the edge field.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "doctest.h"
#include "percolab/renorm.hpp"

using namespace percolab;

namespace {

using BoxKey = std::pair<Coord, Coord>;

BoxKey key2(const Vtx& v) { return {v[0], v[1]}; }

std::set<BoxKey> key_set(const std::vector<Vtx>& boxes) {
  std::set<BoxKey> s;
  for (const Vtx& b : boxes) s.insert(key2(b));
  return s;
}

// First designated-cluster vertex lying in the box proper (not just in B').
Vtx pick_in_box(BoxClassification& cls, const Vtx& idx) {
  const BoxInfo& info = cls.box(idx);
  for (int64_t id : info.cluster) {
    Vtx v = cls.window().vertex_at(id);
    if (macro_index_of(v, cls.params().N, cls.window().dim) == idx) return v;
  }
  throw Error(Errc::precondition_failed, "no cluster vertex in box proper");
}

struct OracleComp {
  std::set<BoxKey> boxes;
  std::set<BoxKey> boundary;
  bool truncated = false;
};

// Independent face-flood over the classified grid, keyed by coordinate pairs.
std::vector<OracleComp> oracle_bad_components(BoxClassification& cls) {
  Coord irad = cls.irad();
  auto good = [&](Coord x, Coord y) { return cls.box(make_vtx(x, y)).good; };
  std::set<BoxKey> seen;
  std::vector<OracleComp> out;
  for (Coord x = -irad; x <= irad; ++x)
    for (Coord y = -irad; y <= irad; ++y) {
      if (good(x, y) || seen.count({x, y})) continue;
      OracleComp comp;
      std::vector<BoxKey> stack{{x, y}};
      seen.insert({x, y});
      comp.boxes.insert({x, y});
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        const Coord dx[4] = {1, -1, 0, 0};
        const Coord dy[4] = {0, 0, 1, -1};
        for (int t = 0; t < 4; ++t) {
          Coord nx = cx + dx[t], ny = cy + dy[t];
          if (std::abs(nx) > irad || std::abs(ny) > irad) {
            comp.truncated = true;
            continue;
          }
          if (good(nx, ny)) {
            comp.boundary.insert({nx, ny});
            continue;
          }
          if (seen.insert({nx, ny}).second) {
            comp.boxes.insert({nx, ny});
            stack.push_back({nx, ny});
          }
        }
      }
      out.push_back(std::move(comp));
    }
  return out;
}

double edge_u(const EdgeField& f, const Vtx& a, const Vtx& b) {
  return f.u(edge_between(a, b, f.window.dim));
}

template <class Fn>
bool throws_code(Fn&& fn, Errc code) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == code;
  } catch (...) {
    return false;
  }
  return false;
}

std::set<std::pair<BoxKey, int>> edge_keys(const LatticePath& path, int dim) {
  std::set<std::pair<BoxKey, int>> s;
  for (size_t t = 1; t < path.v.size(); ++t) {
    Edge e = edge_between(path.v[t - 1], path.v[t], dim);
    s.insert({key2(e.a), int(e.axis)});
  }
  return s;
}

}  // namespace

TEST_CASE("parameter validation rejects malformed settings") {
  auto bad = [](auto mut) {
    RenormParams par;
    mut(par);
    try {
      par.validate();
      return false;
    } catch (const Error& e) {
      return e.code() == Errc::bad_config;
    }
  };
  CHECK(bad([](RenormParams& p) { p.N = 0; }));
  CHECK(bad([](RenormParams& p) { p.p0 = 0; }));
  CHECK(bad([](RenormParams& p) { p.p0 = 0.9; p.p = 0.8; }));
  CHECK(bad([](RenormParams& p) { p.p = 0.95; p.q = 0.9; }));
  CHECK(bad([](RenormParams& p) { p.q = 1.2; }));
  CHECK(bad([](RenormParams& p) { p.beta = 0; }));
  CHECK(bad([](RenormParams& p) { p.rho = 0; }));
  CHECK(bad([](RenormParams& p) { p.rho_hat = -1; }));
  RenormParams ok;
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("grid geometry: classifiable range matches the enlarged-box fit") {
  Window w{2, 25, 0};
  EdgeField f{w, 101, 0};
  RenormParams par;
  par.N = 3;
  par.p0 = par.p = par.q = 1.0;
  BoxClassification cls(f, par, w);
  // halfwidth 25, enlarged half 9, stride 7: indices up to (25 - 9) / 7 = 2
  CHECK(cls.irad() == 2);
  CHECK(cls.grid_count() == 25);
  CHECK(cls.classifiable(make_vtx(2, 2)));
  CHECK(cls.classifiable(make_vtx(-2, 1)));
  CHECK_FALSE(cls.classifiable(make_vtx(3, 0)));
  CHECK_FALSE(cls.classifiable(make_vtx(0, -3)));
  CHECK_THROWS_AS(cls.box(make_vtx(3, 0)), Error);

  Window tiny{2, 8, 0};
  EdgeField ft{tiny, 101, 0};
  BoxClassification none(ft, par, tiny);
  CHECK(none.irad() < 0);
  CHECK(none.grid_count() == 0);
  CHECK_FALSE(none.classifiable(make_vtx(0, 0)));
  CHECK(throws_code([&] { none.box(make_vtx(0, 0)); }, Errc::window_too_small));

  Window huge{2, 16000, 0};
  CHECK_THROWS_AS(BoxClassification(EdgeField{huge, 1, 0}, par, huge), Error);
}

TEST_CASE("fully open lattice: every box is good and the cluster fills B'") {
  Window w{2, 25, 0};
  EdgeField f{w, 2024, 0};
  RenormParams par;
  par.N = 3;
  par.p0 = par.p = par.q = 1.0;
  BoxClassification cls(f, par, w);
  CHECK(cls.good_fraction() == 1.0);
  for (Coord x = -2; x <= 2; ++x)
    for (Coord y = -2; y <= 2; ++y) {
      const BoxInfo& info = cls.box(make_vtx(x, y));
      CHECK(info.unique_big);
      CHECK(info.crossings);
      CHECK(info.diameter_ok);
      CHECK(info.small_leftover);
      CHECK(info.good);
      CHECK(info.cluster.size() == 19u * 19u);
      CHECK(std::is_sorted(info.cluster.begin(), info.cluster.end()));
    }
  Vtx idx = make_vtx(2, 2);
  CHECK(cls.vertex_in_cluster(idx, box_center(idx, 3, 2)));
  CHECK_FALSE(cls.vertex_in_cluster(idx, make_vtx(0, 0)));  // outside B'(2,2)
  CHECK(bad_components(cls).empty());
  BadComponent none = flood_bad_component(cls, make_vtx(1, -1));
  CHECK(none.boxes.empty());
  CHECK(none.boundary.size() == 1);
  CHECK(none.boundary[0] == make_vtx(1, -1));
  CHECK_FALSE(none.truncated);
  CHECK(spans_grid(cls, make_vtx(0, 0)));
  CHECK(spans_grid(cls, make_vtx(2, 2)));
}

TEST_CASE("fully open lattice: routing is geodesic and surgery is the identity") {
  Window w{2, 25, 0};
  EdgeField f{w, 2024, 0};
  RenormParams par;
  par.N = 3;
  par.p0 = par.p = par.q = 1.0;
  BoxClassification cls(f, par, w);
  std::vector<Vtx> all;
  for (Coord x = -2; x <= 2; ++x)
    for (Coord y = -2; y <= 2; ++y) all.push_back(make_vtx(x, y));

  Vtx a = make_vtx(-10, -3), b = make_vtx(8, 5);
  RouteResult r = route_in_good_region(cls, a, b, all);
  CHECK(r.path.front() == a);
  CHECK(r.path.back() == b);
  CHECK(int64_t(r.path.size()) - 1 == norm_l1(a, b, 2));
  CHECK(r.length_bound_ratio == doctest::Approx(26.0 / (3.0 * 25 + 9)).epsilon(1e-12));

  RouteResult still = route_in_good_region(cls, a, a, all);
  CHECK(still.path.size() == 1);
  CHECK(still.length_bound_ratio == 0.0);

  CHECK(throws_code([&] { route_in_good_region(cls, a, b, {}); }, Errc::precondition_failed));
  CHECK(throws_code([&] { route_in_good_region(cls, make_vtx(24, 24), b, all); },
                    Errc::precondition_failed));

  LatticePath gamma;
  for (Coord x = 0; x <= 12; ++x) gamma.v.push_back(make_vtx(x, 0));
  SurgeryReport rep = modify_path(cls, gamma);
  CHECK(rep.closed_count == 0);
  CHECK(rep.added_edges == 0);
  CHECK(rep.surfaces == 0);
  CHECK(rep.bad_mass == 0);
  CHECK(rep.bound_ratio == 0.0);
  CHECK(rep.animal_size == path_animal(gamma, 3, 2).size());
  CHECK(rep.output.v == gamma.v);
  CHECK(verify_surgery(f, par, gamma, rep.output) == "");

  LatticePath empty;
  CHECK(throws_code([&] { modify_path(cls, empty); }, Errc::precondition_failed));
  LatticePath leaves;
  for (Coord x = 24; x <= 26; ++x) leaves.v.push_back(make_vtx(x, 0));
  CHECK(throws_code([&] { modify_path(cls, leaves); }, Errc::precondition_failed));
}

TEST_CASE("nearly empty lattice: the unique-big condition fails almost everywhere") {
  Window w{2, 92, 0};
  EdgeField f{w, 3131, 0};
  RenormParams par;
  par.N = 5;
  par.p0 = par.p = par.q = 0.05;
  BoxClassification cls(f, par, w);
  CHECK(cls.irad() == 7);
  cls.classify_all();
  int64_t fail_i = 0;
  Vtx some_bad = make_vtx(0, 0);
  bool have_bad = false;
  for (Coord x = -7; x <= 7; ++x)
    for (Coord y = -7; y <= 7; ++y) {
      const BoxInfo& info = cls.box(make_vtx(x, y));
      if (!info.unique_big) {
        ++fail_i;
        CHECK_FALSE(info.crossings);
        CHECK_FALSE(info.diameter_ok);
        CHECK_FALSE(info.small_leftover);
        CHECK(info.cluster.empty());
      }
      CHECK(info.good == (info.unique_big && info.crossings && info.diameter_ok &&
                          info.small_leftover));
      if (!info.good && !have_bad) {
        some_bad = make_vtx(x, y);
        have_bad = true;
      }
    }
  CHECK(double(fail_i) >= 0.9 * double(cls.grid_count()));
  REQUIRE(have_bad);
  CHECK_FALSE(spans_grid(cls, some_bad));
  CHECK(throws_code([&] { route_in_good_region(cls, make_vtx(0, 0), make_vtx(0, 0), {some_bad}); },
                    Errc::precondition_failed));

  // single-vertex path skips the q-open scan and reaches the giant check
  LatticePath seed;
  seed.v.push_back(make_vtx(0, 0));
  CHECK(throws_code([&] { modify_path(cls, seed); }, Errc::no_giant));
}

TEST_CASE("bad components match an independent flood and obey the boundary bound") {
  for (uint64_t rep = 0; rep < 3; ++rep) {
    CAPTURE(rep);
    Window w{2, 60, 0};
    EdgeField f{w, 4242, rep};
    RenormParams par;
    par.N = 4;
    par.p0 = 0.70;
    par.p = 0.75;
    par.q = 0.9;
    BoxClassification cls(f, par, w);
    std::vector<BadComponent> comps = bad_components(cls);
    std::vector<OracleComp> oracle = oracle_bad_components(cls);
    REQUIRE(comps.size() == oracle.size());
    REQUIRE(comps.size() >= 2);

    std::map<std::set<BoxKey>, const OracleComp*> by_boxes;
    for (const OracleComp& oc : oracle) by_boxes[oc.boxes] = &oc;
    std::set<BoxKey> all_bad;
    for (const BadComponent& c : comps) {
      REQUIRE_FALSE(c.boxes.empty());
      CHECK(std::is_sorted(c.boxes.begin(), c.boxes.end(),
                           [](const Vtx& a, const Vtx& b) { return lex_less(a, b, 2); }));
      std::set<BoxKey> boxes = key_set(c.boxes);
      auto it = by_boxes.find(boxes);
      REQUIRE(it != by_boxes.end());
      CHECK(key_set(c.boundary) == it->second->boundary);
      CHECK(c.truncated == it->second->truncated);
      // exterior vertex boundary of a face-connected set: at most 2*d*|C|
      CHECK(int64_t(c.boundary.size()) <= 4 * int64_t(c.boxes.size()));
      for (const Vtx& g : c.boundary) CHECK(cls.box(g).good);
      for (const Vtx& b : c.boxes) {
        CHECK_FALSE(cls.box(b).good);
        CHECK_FALSE(all_bad.count(key2(b)));
        all_bad.insert(key2(b));
      }
      BadComponent again = flood_bad_component(cls, c.boxes.front());
      CHECK(again.boxes == c.boxes);
      CHECK(again.boundary == c.boundary);
      CHECK(again.truncated == c.truncated);
    }
    int64_t direct_bad = 0;
    for (Coord x = -5; x <= 5; ++x)
      for (Coord y = -5; y <= 5; ++y)
        if (!cls.box(make_vtx(x, y)).good) ++direct_bad;
    CHECK(int64_t(all_bad.size()) == direct_bad);
  }
}

TEST_CASE("a lone bad box yields one component whose boundary is its good neighborhood") {
  bool found = false;
  for (uint64_t rep = 0; rep < 200 && !found; ++rep) {
    Window w{2, 40, 0};
    EdgeField f{w, 97, rep};
    RenormParams par;
    par.N = 4;
    par.p0 = 0.80;
    par.p = 0.85;
    par.q = 0.9;
    BoxClassification cls(f, par, w);
    cls.classify_all();
    std::vector<Vtx> bad;
    Coord irad = cls.irad();
    for (Coord x = -irad; x <= irad; ++x)
      for (Coord y = -irad; y <= irad; ++y)
        if (!cls.box(make_vtx(x, y)).good) bad.push_back(make_vtx(x, y));
    if (bad.size() != 1) continue;
    found = true;
    CAPTURE(rep);
    Vtx b = bad[0];
    std::vector<BadComponent> comps = bad_components(cls);
    REQUIRE(comps.size() == 1);
    CHECK(comps[0].boxes == bad);
    bool on_edge = std::abs(b[0]) == irad || std::abs(b[1]) == irad;
    CHECK(comps[0].truncated == on_edge);
    std::set<BoxKey> expect;
    const Coord dx[4] = {1, -1, 0, 0};
    const Coord dy[4] = {0, 0, 1, -1};
    for (int t = 0; t < 4; ++t) {
      Coord nx = b[0] + dx[t], ny = b[1] + dy[t];
      if (std::abs(nx) <= irad && std::abs(ny) <= irad) expect.insert({nx, ny});
    }
    CHECK(key_set(comps[0].boundary) == expect);
    BadComponent fl = flood_bad_component(cls, b);
    CHECK(fl.boxes == comps[0].boxes);
    CHECK(fl.boundary == comps[0].boundary);
    // one missing box cannot disconnect the 7x7 good grid from its faces
    Vtx start = (b == make_vtx(-irad, -irad)) ? make_vtx(irad, irad) : make_vtx(-irad, -irad);
    CHECK(spans_grid(cls, start));
  }
  REQUIRE(found);
}

TEST_CASE("routes through good chains are open, stay in the region, and meet the bound") {
  int done = 0;
  double worst = 0;
  for (uint64_t rep = 0; rep < 10; ++rep) {
    CAPTURE(rep);
    Window w{2, 80, 0};
    EdgeField f{w, 555, rep};
    RenormParams par;  // N=8, p0=0.8, p=0.85, q=0.9
    BoxClassification cls(f, par, w);
    std::vector<std::vector<Vtx>> chains;
    chains.push_back({make_vtx(0, 0), make_vtx(1, 0)});
    std::vector<Vtx> lchain;
    for (Coord x = -3; x <= 3; ++x) lchain.push_back(make_vtx(x, -3));
    for (Coord y = -2; y <= 3; ++y) lchain.push_back(make_vtx(3, y));
    chains.push_back(lchain);
    for (const std::vector<Vtx>& chain : chains) {
      bool all_good = true;
      for (const Vtx& bx : chain)
        if (!cls.box(bx).good) all_good = false;
      if (!all_good) continue;
      Vtx a = pick_in_box(cls, chain.front());
      Vtx b = pick_in_box(cls, chain.back());
      RouteResult r = route_in_good_region(cls, a, b, chain);
      REQUIRE(r.path.size() >= 1);
      CHECK(r.path.front() == a);
      CHECK(r.path.back() == b);
      for (size_t t = 1; t < r.path.size(); ++t) {
        CHECK(norm_l1(r.path[t - 1], r.path[t], 2) == 1);
        CHECK(edge_u(f, r.path[t - 1], r.path[t]) < par.p0);
      }
      for (const Vtx& v : r.path) {
        bool in_region = false;
        for (const Vtx& bx : chain)
          if (in_box(v, bx, par.N, 2, Coord(3 * par.N))) in_region = true;
        CHECK(in_region);
      }
      double denom = double(par.N) * double(chain.size()) + double(par.N) * double(par.N);
      CHECK(r.length_bound_ratio ==
            doctest::Approx(double(r.path.size() - 1) / denom).epsilon(1e-12));
      CHECK(r.length_bound_ratio <= par.rho_hat);
      worst = std::max(worst, r.length_bound_ratio);
      ++done;
    }
    if (rep == 0 && cls.box(make_vtx(0, 0)).good) CHECK(spans_grid(cls, make_vtx(0, 0)));
  }
  CHECK(done >= 10);
  CHECK(worst <= 3.0);
}

TEST_CASE("one-defect surgery bypasses the closed edge and verifies cleanly") {
  int found = 0;
  for (uint64_t rep = 0; rep < 150 && found < 2; ++rep) {
    Window w{2, 40, 0};
    EdgeField f{w, 777, rep};
    std::vector<double> us;
    for (Coord x = 0; x < 8; ++x) us.push_back(f.u(Edge{make_vtx(x, 0), 0}));
    double umax = 0, u2nd = 0;
    for (double u : us) {
      if (u > umax) {
        u2nd = umax;
        umax = u;
      } else {
        u2nd = std::max(u2nd, u);
      }
    }
    if (umax < 0.82 || u2nd > 0.76) continue;
    RenormParams par;
    par.N = 6;
    par.p0 = 0.75;
    par.p = std::max((umax + u2nd) / 2, 0.78);
    par.q = (1 + umax) / 2;
    BoxClassification cls(f, par, w);
    const ClusterAnalysis& giant = cls.giant_analysis();
    if (giant.giant < 0 || !giant.in_giant(make_vtx(0, 0)) || !giant.in_giant(make_vtx(8, 0)))
      continue;
    Vtx iy = macro_index_of(make_vtx(0, 0), par.N, 2);
    Vtx iz = macro_index_of(make_vtx(8, 0), par.N, 2);
    if (!cls.box(iy).good || !cls.box(iz).good) continue;

    CAPTURE(rep);
    LatticePath gamma;
    for (Coord x = 0; x <= 8; ++x) gamma.v.push_back(make_vtx(x, 0));
    SurgeryReport sr = modify_path(cls, gamma);
    ++found;

    CHECK(sr.closed_count == 1);
    CHECK(sr.surfaces == 1);
    CHECK(sr.added_edges >= 1);
    CHECK(sr.output.v.front() == gamma.v.front());
    CHECK(sr.output.v.back() == gamma.v.back());
    CHECK(verify_surgery(f, par, gamma, sr.output) == "");
    CHECK(sr.bound_ratio <= par.rho);

    // re-derive every report field from the field and the two paths
    int64_t closed = 0;
    for (size_t t = 1; t < gamma.v.size(); ++t)
      if (edge_u(f, gamma.v[t - 1], gamma.v[t]) >= par.p) ++closed;
    CHECK(sr.closed_count == closed);
    LatticeAnimal animal = path_animal(gamma, par.N, 2);
    CHECK(sr.animal_size == animal.size());
    std::set<std::set<BoxKey>> met;
    int64_t mass = 0;
    for (const Vtx& bx : animal.boxes) {
      if (cls.box(bx).good) continue;
      BadComponent comp = flood_bad_component(cls, bx);
      std::set<BoxKey> id = key_set(comp.boxes);
      if (met.insert(id).second) mass += int64_t(comp.boxes.size());
    }
    CHECK(sr.bad_mass == mass);
    auto in_edges = edge_keys(gamma, 2);
    int64_t added = 0;
    std::set<BoxKey> out_vertices;
    for (size_t t = 1; t < sr.output.v.size(); ++t) {
      Edge e = edge_between(sr.output.v[t - 1], sr.output.v[t], 2);
      if (!in_edges.count({key2(e.a), int(e.axis)})) ++added;
      CHECK(f.u(e) < par.p);
    }
    CHECK(sr.added_edges == added);
    for (const Vtx& v : sr.output.v) CHECK(out_vertices.insert(key2(v)).second);
    double denom = double(par.N) * double(mass) + double(par.N) * double(par.N) * double(closed);
    double expect = denom > 0 ? double(added) / denom : 0.0;
    CHECK(sr.bound_ratio == doctest::Approx(expect).epsilon(1e-12));
  }
  REQUIRE(found == 2);
}

TEST_CASE("good boxes stay good when the leftover level is lowered") {
  for (uint64_t rep = 0; rep < 3; ++rep) {
    CAPTURE(rep);
    Window w{2, 40, 0};
    EdgeField f{w, 808, rep};
    auto classify = [&](double q) {
      RenormParams par;
      par.N = 4;
      par.p0 = 0.75;
      par.p = 0.75;
      par.q = q;
      BoxClassification cls(f, par, w);
      cls.classify_all();
      return cls;
    };
    BoxClassification hi = classify(0.95);
    BoxClassification mid = classify(0.85);
    BoxClassification lo = classify(0.75);
    int64_t ngood_hi = 0, ngood_mid = 0, ngood_lo = 0;
    for (Coord x = -3; x <= 3; ++x)
      for (Coord y = -3; y <= 3; ++y) {
        Vtx i = make_vtx(x, y);
        const BoxInfo& a = hi.box(i);
        const BoxInfo& b = mid.box(i);
        const BoxInfo& c = lo.box(i);
        // conditions not involving the leftover level agree across runs
        CHECK(a.unique_big == b.unique_big);
        CHECK(b.unique_big == c.unique_big);
        CHECK(a.crossings == b.crossings);
        CHECK(a.diameter_ok == c.diameter_ok);
        if (a.small_leftover) CHECK(b.small_leftover);
        if (b.small_leftover) CHECK(c.small_leftover);
        if (a.good) CHECK(b.good);
        if (b.good) CHECK(c.good);
        ngood_hi += a.good;
        ngood_mid += b.good;
        ngood_lo += c.good;
      }
    CHECK(ngood_hi <= ngood_mid);
    CHECK(ngood_mid <= ngood_lo);
  }
}

TEST_CASE("classification of a box is independent of the window around it") {
  RenormParams par;
  par.N = 4;
  par.p0 = 0.70;
  par.p = 0.75;
  par.q = 0.9;
  Window small{2, 40, 0};
  Window large{2, 58, 0};
  EdgeField fs{small, 606, 0};
  EdgeField fl{large, 606, 0};
  BoxClassification a(fs, par, small);
  BoxClassification b(fl, par, large);
  REQUIRE(a.irad() == 3);
  REQUIRE(b.irad() == 5);
  for (Coord x = -3; x <= 3; ++x)
    for (Coord y = -3; y <= 3; ++y) {
      Vtx i = make_vtx(x, y);
      const BoxInfo& ia = a.box(i);
      const BoxInfo& ib = b.box(i);
      CHECK(ia.unique_big == ib.unique_big);
      CHECK(ia.crossings == ib.crossings);
      CHECK(ia.diameter_ok == ib.diameter_ok);
      CHECK(ia.small_leftover == ib.small_leftover);
      CHECK(ia.good == ib.good);
      std::set<BoxKey> ca, cb;
      for (int64_t id : ia.cluster) ca.insert(key2(small.vertex_at(id)));
      for (int64_t id : ib.cluster) cb.insert(key2(large.vertex_at(id)));
      CHECK(ca == cb);
    }
}

TEST_CASE("surgery verifier rejects corrupted outputs") {
  Window w{2, 25, 0};
  EdgeField f{w, 909, 0};
  RenormParams open;
  open.N = 3;
  open.p0 = open.p = open.q = 1.0;

  LatticePath in3;
  for (Coord x = 0; x <= 2; ++x) in3.v.push_back(make_vtx(x, 0));

  LatticePath revisit;
  revisit.v = {make_vtx(0, 0), make_vtx(0, 1), make_vtx(0, 0), make_vtx(1, 0), make_vtx(2, 0)};
  CHECK(verify_surgery(f, open, in3, revisit).find("revisits") != std::string::npos);

  LatticePath shortout;
  shortout.v = {make_vtx(0, 0), make_vtx(1, 0)};
  CHECK(verify_surgery(f, open, in3, shortout).find("end differs") != std::string::npos);

  LatticePath jump;
  jump.v = {make_vtx(0, 0), make_vtx(2, 0)};
  CHECK(verify_surgery(f, open, jump, jump).find("not unit") != std::string::npos);

  // an output edge failing the target level is reported
  RenormParams half = open;
  half.p0 = half.p = half.q = 0.5;
  for (Coord x = -20; x <= 20; ++x) {
    Edge e{make_vtx(x, 0), 0};
    if (f.u(e) >= 0.5) {
      LatticePath one;
      one.v = {e.a, e.b()};
      CHECK(verify_surgery(f, half, one, one).find("not p-open") != std::string::npos);
      break;
    }
  }

  // a detour that rides a sparse-level-closed edge is reported
  RenormParams mixed = open;
  mixed.p0 = 0.5;
  for (Coord x = -20; x <= 20; ++x) {
    Edge north{make_vtx(x, 0), 1};
    if (f.u(north) < 0.5) continue;
    LatticePath base;
    base.v = {make_vtx(x, 0), make_vtx(x + 1, 0)};
    LatticePath detour;
    detour.v = {make_vtx(x, 0), make_vtx(x, 1), make_vtx(x + 1, 1), make_vtx(x + 1, 0)};
    CHECK(verify_surgery(f, mixed, base, detour).find("not p0-open") != std::string::npos);
    break;
  }

  // two disjoint detours anchored on the common part are accepted
  LatticePath in5;
  for (Coord x = 0; x <= 4; ++x) in5.v.push_back(make_vtx(x, 0));
  LatticePath two;
  two.v = {make_vtx(0, 0), make_vtx(0, 1), make_vtx(1, 1), make_vtx(1, 0), make_vtx(2, 0),
           make_vtx(2, 1), make_vtx(3, 1), make_vtx(3, 0), make_vtx(4, 0)};
  CHECK(verify_surgery(f, open, in5, two) == "");
}
