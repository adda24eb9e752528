// Postcondition checker for path surgery, kept deliberately apart from the
// builder: straight rescans of both paths against the edge field, with its own
// key encoding and no helpers from the construction side.
#include <array>
#include <set>
#include <sstream>
#include <string>

#include "percolab/renorm.hpp"

namespace percolab {

namespace {

using VKey = std::array<Coord, kMaxDim>;
using EKey = std::array<Coord, kMaxDim + 1>;

VKey vkey(const Vtx& v) { return {v.c[0], v.c[1], v.c[2], v.c[3]}; }

// orientation-free edge key: lexicographically smaller endpoint plus axis
EKey ekey(const Vtx& a, const Vtx& b, int dim) {
  int axis = -1;
  for (int k = 0; k < dim; ++k)
    if (a.c[k] != b.c[k]) axis = k;
  const Vtx& lo = lex_less(a, b, dim) ? a : b;
  return {lo.c[0], lo.c[1], lo.c[2], lo.c[3], Coord(axis)};
}

std::string at(const char* what, size_t i) {
  std::ostringstream os;
  os << what << " at index " << i;
  return os.str();
}

}  // namespace

std::string verify_surgery(const EdgeField& field, const RenormParams& params,
                           const LatticePath& input, const LatticePath& output) {
  int dim = field.window.dim;
  if (input.v.size() < 1) return "input path empty";
  if (output.v.size() < 1) return "output path empty";
  if (!(output.v.front() == input.v.front())) return "output start differs from input start";
  if (!(output.v.back() == input.v.back())) return "output end differs from input end";

  for (size_t t = 1; t < input.v.size(); ++t)
    if (norm_l1(input.v[t - 1], input.v[t], dim) != 1) return at("input step not unit", t);
  for (size_t t = 1; t < output.v.size(); ++t)
    if (norm_l1(output.v[t - 1], output.v[t], dim) != 1) return at("output step not unit", t);

  auto uval = [&](const Vtx& a, const Vtx& b) {
    EKey k = ekey(a, b, dim);
    Vtx lo{{k[0], k[1], k[2], k[3]}};
    return field.u(Edge{lo, int8_t(k[4])});
  };

  for (size_t t = 1; t < output.v.size(); ++t)
    if (uval(output.v[t - 1], output.v[t]) >= params.p) return at("output edge not p-open", t);

  std::set<EKey> input_edges;
  for (size_t t = 1; t < input.v.size(); ++t)
    input_edges.insert(ekey(input.v[t - 1], input.v[t], dim));

  // vertices of the common part: endpoints of edges shared by both paths
  std::set<VKey> common_vertices;
  std::vector<bool> added(output.v.size(), false);  // added[t] marks edge t
  for (size_t t = 1; t < output.v.size(); ++t) {
    if (input_edges.count(ekey(output.v[t - 1], output.v[t], dim))) {
      common_vertices.insert(vkey(output.v[t - 1]));
      common_vertices.insert(vkey(output.v[t]));
    } else {
      added[t] = true;
    }
  }

  std::set<VKey> seen_in_runs;
  size_t t = 1;
  while (t < output.v.size()) {
    if (!added[t]) {
      ++t;
      continue;
    }
    size_t a = t;
    while (t < output.v.size() && added[t]) ++t;
    size_t b = t - 1;  // run covers edges a..b, vertices a-1..b

    std::set<VKey> run_vertices;
    for (size_t k = a - 1; k <= b; ++k) {
      if (!run_vertices.insert(vkey(output.v[k])).second)
        return at("added segment revisits a vertex", k);
      if (!seen_in_runs.insert(vkey(output.v[k])).second)
        return at("added segments share a vertex", k);
    }
    for (size_t k = a; k <= b; ++k)
      if (uval(output.v[k - 1], output.v[k]) >= params.p0)
        return at("added edge not p0-open", k);
    for (size_t k = a; k < b; ++k)
      if (common_vertices.count(vkey(output.v[k])))
        return at("added segment touches common part away from its ends", k);
    bool start_ok = common_vertices.count(vkey(output.v[a - 1])) || a - 1 == 0;
    bool end_ok = common_vertices.count(vkey(output.v[b])) || b + 1 == output.v.size();
    if (!start_ok) return at("added segment start off the common part", a - 1);
    if (!end_ok) return at("added segment end off the common part", b);
  }
  return "";
}

}  // namespace percolab
