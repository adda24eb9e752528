// Finite atomic passage-time laws on [0, +inf] and their survival-function calculus.
#pragma once

#include <limits>
#include <string>
#include <vector>

#include "percolab/error.hpp"

namespace percolab {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Atom {
  double value = 0;   // in [0, +inf]; kInf marks the atom at infinity
  double weight = 0;  // in (0, 1]
};

// Atoms sorted by strictly increasing value, at most one infinite atom (last),
// weights summing to 1 within 1e-12. `cum[i]` is the total weight strictly
// below atom i, so cum[0] = 0 and cum[k] would be 1.
struct DistributionSpec {
  std::vector<Atom> atoms;
  std::string label;

  std::vector<double> cum;  // rebuilt by validate()

  void validate();
  double inf_weight() const {
    return (!atoms.empty() && atoms.back().value == kInf) ? atoms.back().weight : 0.0;
  }
};

DistributionSpec make_law(std::vector<Atom> atoms, std::string label = "");

// Dirac mass at v (v may be kInf).
DistributionSpec dirac(double v, std::string label = "");

// p*delta_1 + (1-p)*delta_inf for p in (0,1]; p = 1 degenerates to delta_1.
DistributionSpec bernoulli_law(double p);

// Mass at values >= t, for finite t. Non-increasing and left-continuous in t.
double survival(const DistributionSpec& g, double t);

// Mass at values <= t, for finite t.
double cdf(const DistributionSpec& g, double t);

// sup{ s >= 0 : survival(g, s) >= 1 - u }, u in (0,1). Returns kInf when the
// tail at infinity already meets 1 - u.
double hat_inverse(const DistributionSpec& g, double u);

// Same sup with strict inequality survival(g, s) > 1 - u.
double tilde_inverse(const DistributionSpec& g, double u);

// Interior cumulative-weight levels: the finitely many u where hat and tilde differ.
std::vector<double> flat_levels(const DistributionSpec& g);

// Atoms below K kept, all mass at [K, +inf] collapsed onto an atom at K.
DistributionSpec truncate(const DistributionSpec& g, double K);

enum class Order {
  equal,
  first_below,   // g1 precedes g2: survival(g1, t) <= survival(g2, t) for all t
  second_below,  // g2 precedes g1
  incomparable,
};

Order stochastic_order(const DistributionSpec& g1, const DistributionSpec& g2);

// Law whose survival is the pointwise max (resp. min) of the inputs' survivals.
// Exact for atomic inputs: the envelope is again atomic on the merged value grid.
DistributionSpec envelope_sup(const std::vector<DistributionSpec>& gs);
DistributionSpec envelope_inf(const std::vector<DistributionSpec>& gs);

std::string law_str(const DistributionSpec& g);

}  // namespace percolab
