// Coarse-grained block analysis: good-box classification on the macro grid,
// bad-component surfaces, routing through good regions, and path surgery that
// upgrades a q-open path to a p-open one at controlled extra length.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "percolab/cluster.hpp"
#include "percolab/field.hpp"
#include "percolab/lattice.hpp"

namespace percolab {

struct RenormParams {
  int N = 8;
  double p0 = 0.8;  // dense level defining designated clusters
  double p = 0.85;  // target openness of the rebuilt path
  double q = 0.9;   // level of the input path
  double beta = 6.0;      // designated-cluster diameter control: distances <= 3*beta*N
  double rho = 2.0;       // frozen surgery-length constant (regression guard)
  double rho_hat = 3.0;   // frozen routing-length constant (regression guard)

  void validate() const {
    if (N < 1) throw Error(Errc::bad_config, "renorm: N >= 1 required");
    if (!(p0 > 0) || !(p0 <= p) || !(p <= q) || !(q <= 1))
      throw Error(Errc::bad_config, "renorm: 0 < p0 <= p <= q <= 1 required");
    if (!(beta > 0) || !(rho > 0) || !(rho_hat > 0))
      throw Error(Errc::bad_config, "renorm: beta, rho, rho_hat > 0 required");
  }
};

// Condition flags for one macro box. When (i) fails the designated cluster is
// undefined and (ii)-(iv) are reported failed without evaluation.
struct BoxInfo {
  bool unique_big = false;      // (i) exactly one component of B' with > N vertices
  bool crossings = false;       // (ii) that cluster crosses all 3^d sub-boxes
  bool diameter_ok = false;     // (iii) far pairs in the cluster within 3*beta*N hops
  bool small_leftover = false;  // (iv) q-components disjoint from the cluster have <= N vertices
  bool good = false;
  std::vector<int64_t> cluster;  // designated cluster as sorted arena vertex indices
};

class BoxClassification {
public:
  BoxClassification(const EdgeField& field, const RenormParams& params, const Window& window);

  // Largest macro coordinate whose enlarged box fits in the arena.
  Coord irad() const { return irad_; }
  bool classifiable(const Vtx& idx) const;

  // Lazy, memoized; single-threaded access.
  const BoxInfo& box(const Vtx& idx);

  // Classify the whole grid (optionally with worker threads; boxes are
  // independent, so the result is identical for any worker count).
  void classify_all(int workers = 1);

  bool vertex_in_cluster(const Vtx& idx, const Vtx& v);

  const Window& window() const { return win_; }
  const RenormParams& params() const { return par_; }
  const EdgeField& field() const { return *field_; }

  // p0-analysis of the full arena, built on first use.
  const ClusterAnalysis& giant_analysis();

  int64_t grid_count() const;              // number of classifiable boxes
  double good_fraction();                   // classifies the whole grid

private:
  friend struct BoxScratch;
  const EdgeField* field_;
  RenormParams par_;
  Window win_;
  Coord irad_ = -1;
  int64_t gside_ = 0;
  std::vector<std::unique_ptr<BoxInfo>> memo_;
  std::unique_ptr<ClusterAnalysis> giant_;

  int64_t grid_index(const Vtx& idx) const;
  std::unique_ptr<BoxInfo> classify_box(const Vtx& idx) const;
};

// Face-connected component of bad boxes plus its exterior vertex boundary
// (the good face-neighbors). `truncated` marks components that reach the edge
// of the classifiable grid, where the boundary cannot be completed.
struct BadComponent {
  std::vector<Vtx> boxes;
  std::vector<Vtx> boundary;
  bool truncated = false;
};

// All bad components of the classified grid (classifies everything).
std::vector<BadComponent> bad_components(BoxClassification& cls);

// Bad component containing `seed` discovered lazily.
BadComponent flood_bad_component(BoxClassification& cls, const Vtx& seed);

struct RouteResult {
  std::vector<Vtx> path;
  double length_bound_ratio = 0;  // |path| / (N*n_boxes + N^d)
};

// Shortest p0-open path between two designated-cluster vertices that stays in
// the union of enlarged boxes of the given good set. Throws routing_failed
// when the region does not connect them.
RouteResult route_in_good_region(BoxClassification& cls, const Vtx& a, const Vtx& b,
                                 const std::vector<Vtx>& good_boxes);

// True when the good-box component of `start` touches all 2*dim faces of the
// classifiable grid. Explores lazily, at worst the whole component.
bool spans_grid(BoxClassification& cls, const Vtx& start);

struct SurgeryReport {
  LatticePath input;
  LatticePath output;
  int64_t closed_count = 0;   // p-closed edges of the input
  int64_t bad_mass = 0;       // total size of bad components meeting the path animal
  int64_t animal_size = 0;
  int64_t added_edges = 0;    // edges of output not on the input
  int64_t surfaces = 0;       // bypass surfaces used
  double bound_ratio = 0;     // added_edges / (N*bad_mass + N^dim*closed_count)
  std::string to_json() const;
};

// Rebuilds a q-open path between giant-cluster endpoints into a p-open one.
// Preconditions: endpoints in the p0 giant, endpoint boxes good, every input
// edge q-open.
SurgeryReport modify_path(BoxClassification& cls, const LatticePath& gamma);

// Independent postcondition check, implemented apart from the builder: output
// edges all p-open, and output-minus-input decomposes into pairwise disjoint
// self-avoiding p0-open segments meeting the common part only at their ends.
// Returns an empty string on success, else a description of the violation.
std::string verify_surgery(const EdgeField& field, const RenormParams& params,
                           const LatticePath& input, const LatticePath& output);

}  // namespace percolab
