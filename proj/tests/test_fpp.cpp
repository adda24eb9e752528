#include <algorithm>
#include <random>
#include <vector>

#include "doctest.h"
#include "percolab/fpp.hpp"

using namespace percolab;

static Window win2(Coord radius, Coord margin = 0) {
  Window w;
  w.dim = 2;
  w.radius = radius;
  w.margin = margin;
  return w;
}

// ---------------------------------------------------------------- oracle
// Exhaustive minimum over self-avoiding paths, accumulating each path's edge
// times left to right in visit order. The production search folds its sums the
// same way and rounding is monotone under a shared addend, so the two minima
// agree bitwise. Prunes branches whose partial sum already exceeds the best.

static void oracle_dfs(const TimeView& view, const Window& win, const Vtx& cur, const Vtx& goal,
                       std::vector<char>& used, double acc, double& best) {
  if (acc >= best) return;
  if (cur == goal) {
    best = acc;
    return;
  }
  for (int k = 0; k < win.dim; ++k)
    for (int s : {1, -1}) {
      Vtx nxt = cur;
      nxt[k] += Coord(s);
      if (!win.contains(nxt)) continue;
      int64_t idx = win.index_of(nxt);
      if (used[size_t(idx)]) continue;
      double t = view.time(edge_between(cur, nxt, win.dim));
      if (t == kInf) continue;
      double cand = acc + t;
      used[size_t(idx)] = 1;
      oracle_dfs(view, win, nxt, goal, used, cand, best);
      used[size_t(idx)] = 0;
    }
}

static double oracle_travel(const TimeView& view, const Vtx& a, const Vtx& b, const Window& win) {
  std::vector<char> used(size_t(win.vertex_count()), 0);
  used[size_t(win.index_of(a))] = 1;
  double best = kInf;
  oracle_dfs(view, win, a, b, used, 0.0, best);
  return best;
}

// random law with atom values on the 1/8 grid so edge-time sums are exact
static DistributionSpec random_law3(std::mt19937_64& rng, bool allow_inf) {
  std::uniform_int_distribution<int> val(0, 32);
  std::vector<int> values;
  while (values.size() < 3) {
    int v = val(rng);
    if (std::find(values.begin(), values.end(), v) == values.end()) values.push_back(v);
  }
  std::sort(values.begin(), values.end());
  std::vector<int> weights{1, 1, 1};
  for (int unit = 3; unit < 16; ++unit) ++weights[rng() % 3];
  bool with_inf = allow_inf && (rng() % 4 == 0);
  std::vector<Atom> atoms;
  for (int i = 0; i < 3; ++i) {
    double w = double(weights[size_t(i)]) / 16.0;
    if (with_inf && i == 2) {
      atoms.push_back({kInf, w});
    } else {
      atoms.push_back({double(values[size_t(i)]) / 8.0, w});
    }
  }
  return make_law(atoms);
}

// ---------------------------------------------------------------- tests

TEST_CASE("constant law scales the l1 distance") {
  Window w = win2(9);
  EdgeField f{w, 1, 0};
  DistributionSpec law = dirac(2.5);
  TimeView view{&f, &law};
  TravelResult r = travel_time(view, make_vtx(0, 0), make_vtx(4, -3), w);
  CHECK(r.time == 2.5 * 7);
  CHECK(int64_t(r.path.size()) == 8);

  TravelResult same = travel_time(view, make_vtx(2, 2), make_vtx(2, 2), w);
  CHECK(same.time == 0.0);
  CHECK(same.path.size() == 1);
}

TEST_CASE("geodesic certifies its own time") {
  Window w = win2(7);
  std::mt19937_64 rng(51);
  for (uint64_t repl = 0; repl < 20; ++repl) {
    EdgeField f{w, 2, repl};
    DistributionSpec law = random_law3(rng, true);
    TimeView view{&f, &law};
    std::uniform_int_distribution<Coord> coord(-7, 7);
    Vtx a = make_vtx(coord(rng), coord(rng));
    Vtx b = make_vtx(coord(rng), coord(rng));
    TravelResult r = travel_time(view, a, b, w);
    if (r.time == kInf) {
      CHECK(r.path.empty());
      continue;
    }
    REQUIRE(!r.path.empty());
    CHECK(r.path.front() == a);
    CHECK(r.path.back() == b);
    double sum = 0;
    for (size_t i = 1; i < r.path.size(); ++i)
      sum += view.time(edge_between(r.path[i - 1], r.path[i], 2));
    CHECK(sum == r.time);
  }
}

TEST_CASE("travel time matches exhaustive enumeration bitwise") {
  Window w = win2(2);
  std::mt19937_64 rng(52);
  std::uniform_int_distribution<Coord> coord(-2, 2);
  for (int it = 0; it < 30; ++it) {
    EdgeField f{w, 3, uint64_t(it)};
    DistributionSpec law = random_law3(rng, true);
    TimeView view{&f, &law};
    Vtx a = make_vtx(coord(rng), coord(rng));
    Vtx b = make_vtx(coord(rng), coord(rng));
    CHECK(travel_time(view, a, b, w).time == oracle_travel(view, a, b, w));
  }
}

TEST_CASE("single source pass agrees with pairwise queries") {
  Window w = win2(5);
  EdgeField f{w, 4, 0};
  DistributionSpec law = make_law({{0.5, 0.5}, {2.0, 0.25}, {kInf, 0.25}});
  TimeView view{&f, &law};
  Vtx src = make_vtx(0, 0);
  TimesFrom tf = times_from(view, src, w);
  std::mt19937_64 rng(53);
  std::uniform_int_distribution<Coord> coord(-5, 5);
  for (int it = 0; it < 40; ++it) {
    Vtx b = make_vtx(coord(rng), coord(rng));
    CHECK(tf.dist[size_t(w.index_of(b))] == travel_time(view, src, b, w).time);
  }
}

TEST_CASE("subadditivity is exact on dyadic laws") {
  Window w = win2(8);
  std::mt19937_64 rng(54);
  std::uniform_int_distribution<Coord> coord(-8, 8);
  for (uint64_t repl = 0; repl < 25; ++repl) {
    EdgeField f{w, 5, repl};
    DistributionSpec law = random_law3(rng, false);
    TimeView view{&f, &law};
    Vtx a = make_vtx(coord(rng), coord(rng));
    Vtx b = make_vtx(coord(rng), coord(rng));
    Vtx c = make_vtx(coord(rng), coord(rng));
    double ab = travel_time(view, a, b, w).time;
    double bc = travel_time(view, b, c, w).time;
    double ac = travel_time(view, a, c, w).time;
    CHECK(ac <= ab + bc);
  }
}

TEST_CASE("pathwise monotonicity under stochastic order") {
  Window w = win2(6);
  std::mt19937_64 rng(55);
  std::uniform_int_distribution<Coord> coord(-6, 6);
  for (uint64_t repl = 0; repl < 50; ++repl) {
    EdgeField f{w, 6, repl};
    DistributionSpec h = random_law3(rng, true);
    double kcut = 0.25 + double(rng() % 24) / 8.0;
    DistributionSpec g = truncate(h, kcut);  // g precedes h stochastically
    TimeView tg{&f, &g};
    TimeView th{&f, &h};
    Vtx a = make_vtx(coord(rng), coord(rng));
    Vtx b = make_vtx(coord(rng), coord(rng));
    CHECK(travel_time(tg, a, b, w).time <= travel_time(th, a, b, w).time);
  }
}

TEST_CASE("regularized time projects onto the level cluster") {
  Window w = win2(12, 6);
  DistributionSpec law = make_law({{1.0, 0.8}, {kInf, 0.2}});
  for (uint64_t repl = 0; repl < 10; ++repl) {
    EdgeField f{w, 7, repl};
    TimeView view{&f, &law};
    RegularizedResult r = regularized_time(view, 1.0, make_vtx(-9, 0), make_vtx(9, 0), w);
    OpenView lv = view.level_view(1.0);
    ClusterAnalysis an = analyze(lv, w);
    CHECK(an.in_giant(r.a_proj));
    CHECK(an.in_giant(r.b_proj));
    CHECK(r.time < kInf);
    REQUIRE(r.level_distance >= 0);
    // the level cluster bounds the regularized time by M per hop
    CHECK(r.time <= 1.0 * double(r.level_distance));
    CHECK(r.a_proj == regularize(make_vtx(-9, 0), an));
    CHECK(r.b_proj == regularize(make_vtx(9, 0), an));
  }
}

TEST_CASE("regularized time equals plain travel time when endpoints lie in the cluster") {
  Window w = win2(10, 5);
  DistributionSpec law = dirac(1.0);
  EdgeField f{w, 8, 0};
  TimeView view{&f, &law};
  RegularizedResult r = regularized_time(view, 1.0, make_vtx(-5, 2), make_vtx(6, -1), w);
  CHECK(r.a_proj == make_vtx(-5, 2));
  CHECK(r.b_proj == make_vtx(6, -1));
  CHECK(r.time == travel_time(view, make_vtx(-5, 2), make_vtx(6, -1), w).time);
  CHECK(r.time == 14.0);
}

TEST_CASE("regularized time throws without a giant at the level") {
  Window w = win2(8);
  DistributionSpec law = bernoulli_law(0.05);  // sublevel set far below percolation
  EdgeField f{w, 9, 0};
  TimeView view{&f, &law};
  CHECK_THROWS_AS(regularized_time(view, 1.0, make_vtx(0, 0), make_vtx(5, 0), w), Error);
}

TEST_CASE("mu estimate of the constant law is exactly one") {
  DistributionSpec law = dirac(1.0);
  MuEstimate mu = mu_estimate(law, 1.0, make_vtx(1, 0), 10, 30, 10);
  CHECK(mu.at_n.mean == 1.0);
  CHECK(mu.at_n.se == 0.0);
  CHECK(mu.subadd_min == 1.0);
  for (double v : mu.per_replica) CHECK(v == 1.0);
}

TEST_CASE("mu estimate is homogeneous across matched displacements") {
  DistributionSpec law = bernoulli_law(0.9);
  MuEstimate a = mu_estimate(law, 1.0, make_vtx(1, 0), 16, 40, 11);
  MuEstimate b = mu_estimate(law, 1.0, make_vtx(2, 0), 8, 40, 12);
  // mu(2 e1) = 2 mu(e1): both runs span 16 steps along the axis
  double diff = std::abs(a.at_n.mean - b.at_n.mean / 2.0);
  double se = joint_se(a.at_n.se, b.at_n.se / 2.0);
  CHECK(diff <= 3 * se + 1e-12);
}

TEST_CASE("subadditive minimum bounds the scale-n mean") {
  DistributionSpec law = make_law({{0.5, 0.5}, {1.5, 0.5}});
  MuEstimate mu = mu_estimate(law, 1.5, make_vtx(1, 1), 8, 25, 13);
  CHECK(mu.subadd_min <= mu.at_n.mean + 1e-12);
  CHECK(mu.flagged == 0);
}

TEST_CASE("stabilization: a dominating law's cluster gives compatible estimates") {
  // estimate travel times of g between projections chosen by h's level cluster,
  // where g precedes h; compare against g's native regularization
  DistributionSpec h = bernoulli_law(0.8);
  DistributionSpec g = bernoulli_law(0.95);
  Window w = win2(20, 10);
  const int64_t n = 12;
  std::vector<double> native, stabilized;
  for (uint64_t repl = 0; repl < 40; ++repl) {
    EdgeField f{w, 14, repl};
    TimeView tg{&f, &g};
    TimeView th{&f, &h};
    RegularizedResult rn = regularized_time(tg, 1.0, make_vtx(0, 0), make_vtx(Coord(n), 0), w);
    native.push_back(rn.time / double(n));

    ClusterAnalysis hc = analyze(th.level_view(1.0), w);
    REQUIRE(hc.giant >= 0);
    Vtx a = regularize(make_vtx(0, 0), hc);
    Vtx b = regularize(make_vtx(Coord(n), 0), hc);
    TravelResult rs = travel_time(tg, a, b, w);
    REQUIRE(rs.time < kInf);
    stabilized.push_back(rs.time / double(n));
  }
  Stat sn = mean_se(native), ss = mean_se(stabilized);
  CHECK(std::abs(sn.mean - ss.mean) <= 3 * joint_se(sn.se, ss.se) + 1e-12);
}

TEST_CASE("truncation sweep: plateau above the support is exact") {
  DistributionSpec law = make_law({{1.0, 0.5}, {2.0, 0.5}});
  TruncationSweep sw = truncation_sweep(law, 2.0, make_vtx(1, 0), 6, {2.0, 5.0, 10.0}, 20, 15);
  CHECK(sw.monotone_violations == 0);
  REQUIRE(sw.rows.size() == 3);
  // K at or above the largest atom reproduces the base law replica by replica
  for (const TruncationRow& row : sw.rows) {
    REQUIRE(row.per_replica.size() == sw.base.per_replica.size());
    for (size_t i = 0; i < row.per_replica.size(); ++i)
      CHECK(row.per_replica[i] == sw.base.per_replica[i]);
  }
  CHECK(sw.majorant.stat.mean == sw.base.stat.mean);
}

TEST_CASE("truncation sweep is monotone in K with an infinite atom") {
  DistributionSpec law = bernoulli_law(0.8);
  TruncationSweep sw = truncation_sweep(law, 1.0, make_vtx(1, 0), 6, {2.0, 4.0, 8.0}, 25, 16);
  CHECK(sw.monotone_violations == 0);
  REQUIRE(sw.rows.size() == 3);
  for (size_t i = 0; i + 1 < sw.rows.size(); ++i)
    for (size_t r = 0; r < sw.rows[i].per_replica.size(); ++r)
      CHECK(sw.rows[i].per_replica[r] <= sw.rows[i + 1].per_replica[r]);
  // every truncation is bounded by the majorant pathwise
  for (size_t r = 0; r < sw.majorant.per_replica.size(); ++r)
    CHECK(sw.rows.back().per_replica[r] <= sw.majorant.per_replica[r]);
}
