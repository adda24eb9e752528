#include "percolab/dist.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace percolab {

namespace {

constexpr double kWeightTol = 1e-12;

}  // namespace

void DistributionSpec::validate() {
  if (atoms.empty()) throw Error(Errc::bad_config, "law: needs at least one atom");
  double total = 0;
  for (size_t i = 0; i < atoms.size(); ++i) {
    const Atom& a = atoms[i];
    if (std::isnan(a.value) || a.value < 0)
      throw Error(Errc::bad_config, "law: atom values must lie in [0, +inf]");
    if (a.value == kInf && i + 1 != atoms.size())
      throw Error(Errc::bad_config, "law: at most one infinite atom, placed last");
    if (!(a.weight > 0) || a.weight > 1)
      throw Error(Errc::bad_config, "law: atom weights must lie in (0, 1]");
    if (i > 0 && !(atoms[i - 1].value < a.value))
      throw Error(Errc::bad_config, "law: atom values must be strictly increasing");
    total += a.weight;
  }
  if (std::abs(total - 1.0) > kWeightTol)
    throw Error(Errc::bad_config, "law: weights must sum to 1 within 1e-12");
  cum.assign(atoms.size(), 0.0);
  double c = 0;
  for (size_t i = 0; i < atoms.size(); ++i) {
    cum[i] = c;
    c += atoms[i].weight;
  }
}

DistributionSpec make_law(std::vector<Atom> atoms, std::string label) {
  DistributionSpec g;
  g.atoms = std::move(atoms);
  g.label = std::move(label);
  g.validate();
  return g;
}

DistributionSpec dirac(double v, std::string label) {
  return make_law({{v, 1.0}}, std::move(label));
}

DistributionSpec bernoulli_law(double p) {
  if (!(p > 0) || p > 1) throw Error(Errc::bad_config, "bernoulli_law: p in (0,1] required");
  if (p == 1.0) return dirac(1.0, "delta_1");
  return make_law({{1.0, p}, {kInf, 1.0 - p}}, "bern(" + std::to_string(p) + ")");
}

double survival(const DistributionSpec& g, double t) {
  double s = 0;
  for (const Atom& a : g.atoms) {
    if (a.value >= t) s += a.weight;
  }
  return s;
}

double cdf(const DistributionSpec& g, double t) {
  double s = 0;
  for (const Atom& a : g.atoms) {
    if (a.value <= t) s += a.weight;
  }
  return s;
}

// Both pseudo-inverses pick the last atom whose below-mass clears u; `strict`
// distinguishes them exactly at the interior cumulative levels.
static double inverse_impl(const DistributionSpec& g, double u, bool strict) {
  if (!(u > 0) || !(u < 1)) throw Error(Errc::precondition_failed, "inverse: u in (0,1) required");
  size_t pick = 0;
  for (size_t i = 1; i < g.atoms.size(); ++i) {
    bool ok = strict ? (g.cum[i] < u) : (g.cum[i] <= u);
    if (ok) pick = i;
  }
  return g.atoms[pick].value;
}

double hat_inverse(const DistributionSpec& g, double u) { return inverse_impl(g, u, false); }

double tilde_inverse(const DistributionSpec& g, double u) { return inverse_impl(g, u, true); }

std::vector<double> flat_levels(const DistributionSpec& g) {
  std::vector<double> out;
  for (size_t i = 1; i < g.atoms.size(); ++i) out.push_back(g.cum[i]);
  return out;
}

DistributionSpec truncate(const DistributionSpec& g, double K) {
  if (!(K >= 0) || K == kInf) throw Error(Errc::bad_config, "truncate: finite K >= 0 required");
  std::vector<Atom> atoms;
  double collapsed = 0;
  for (const Atom& a : g.atoms) {
    if (a.value < K)
      atoms.push_back(a);
    else
      collapsed += a.weight;
  }
  if (collapsed > 0) atoms.push_back({K, collapsed});
  return make_law(std::move(atoms), g.label.empty() ? "" : g.label + "^" + std::to_string(K));
}

// Survivals are left-continuous step functions jumping only at atom values, so
// comparing them on the merged grid plus the tails at infinity decides order.
Order stochastic_order(const DistributionSpec& g1, const DistributionSpec& g2) {
  std::vector<double> grid;
  for (const Atom& a : g1.atoms)
    if (a.value != kInf) grid.push_back(a.value);
  for (const Atom& a : g2.atoms)
    if (a.value != kInf) grid.push_back(a.value);
  grid.push_back(0.0);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  bool first_ge = true, second_ge = true;  // survival(g1) >= survival(g2) everywhere, and dual
  auto feed = [&](double s1, double s2) {
    if (s1 < s2) first_ge = false;
    if (s2 < s1) second_ge = false;
  };
  for (double t : grid) feed(survival(g1, t), survival(g2, t));
  feed(g1.inf_weight(), g2.inf_weight());

  if (first_ge && second_ge) return Order::equal;
  if (second_ge) return Order::first_below;
  if (first_ge) return Order::second_below;
  return Order::incomparable;
}

static DistributionSpec envelope_impl(const std::vector<DistributionSpec>& gs, bool take_max) {
  if (gs.empty()) throw Error(Errc::bad_config, "envelope: needs at least one law");
  std::vector<double> grid;
  for (const DistributionSpec& g : gs)
    for (const Atom& a : g.atoms)
      if (a.value != kInf) grid.push_back(a.value);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  auto env = [&](double t) {
    double best = take_max ? 0.0 : 2.0;
    for (const DistributionSpec& g : gs) {
      double s = survival(g, t);
      best = take_max ? std::max(best, s) : std::min(best, s);
    }
    return best;
  };

  // Tail value on each segment ending at a grid point, then at infinity; the
  // envelope's atoms are the downward jumps of that step function.
  std::vector<Atom> atoms;
  double tail_inf = take_max ? 0.0 : 2.0;
  for (const DistributionSpec& g : gs) {
    double w = g.inf_weight();
    tail_inf = take_max ? std::max(tail_inf, w) : std::min(tail_inf, w);
  }
  for (size_t i = 0; i < grid.size(); ++i) {
    double here = env(grid[i]);
    double after = (i + 1 < grid.size()) ? env(grid[i + 1]) : tail_inf;
    if (here - after > 0) atoms.push_back({grid[i], here - after});
  }
  if (tail_inf > 0) atoms.push_back({kInf, tail_inf});
  return make_law(std::move(atoms), take_max ? "env_sup" : "env_inf");
}

DistributionSpec envelope_sup(const std::vector<DistributionSpec>& gs) {
  return envelope_impl(gs, true);
}

DistributionSpec envelope_inf(const std::vector<DistributionSpec>& gs) {
  return envelope_impl(gs, false);
}

std::string law_str(const DistributionSpec& g) {
  std::string s;
  for (size_t i = 0; i < g.atoms.size(); ++i) {
    char buf[64];
    if (g.atoms[i].value == kInf)
      std::snprintf(buf, sizeof buf, "%.6g*d(inf)", g.atoms[i].weight);
    else
      std::snprintf(buf, sizeof buf, "%.6g*d(%.6g)", g.atoms[i].weight, g.atoms[i].value);
    s += buf;
    if (i + 1 < g.atoms.size()) s += " + ";
  }
  return s;
}

}  // namespace percolab
