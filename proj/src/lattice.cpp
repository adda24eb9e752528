#include "percolab/lattice.hpp"

#include <algorithm>
#include <cstdio>

namespace percolab {

bool LatticeAnimal::contains(const Vtx& idx, int dim) const {
  auto cmp = [dim](const Vtx& a, const Vtx& b) { return lex_less(a, b, dim); };
  auto it = std::lower_bound(boxes.begin(), boxes.end(), idx, cmp);
  return it != boxes.end() && *it == idx;
}

LatticeAnimal path_animal(const LatticePath& path, int N, int dim) {
  path.validate(dim);
  LatticeAnimal a;
  a.boxes.reserve(path.v.size());
  for (const Vtx& v : path.v) a.boxes.push_back(macro_index_of(v, N, dim));
  auto cmp = [dim](const Vtx& x, const Vtx& y) { return lex_less(x, y, dim); };
  std::sort(a.boxes.begin(), a.boxes.end(), cmp);
  a.boxes.erase(std::unique(a.boxes.begin(), a.boxes.end()), a.boxes.end());
  return a;
}

bool animal_connected(const LatticeAnimal& a, int dim) {
  if (a.boxes.empty()) return true;
  std::vector<char> seen(a.boxes.size(), 0);
  std::vector<size_t> stack{0};
  seen[0] = 1;
  size_t reached = 1;
  auto cmp = [dim](const Vtx& x, const Vtx& y) { return lex_less(x, y, dim); };
  while (!stack.empty()) {
    size_t i = stack.back();
    stack.pop_back();
    for (int k = 0; k < dim; ++k) {
      for (int s = -1; s <= 1; s += 2) {
        Vtx nb = a.boxes[i];
        nb[k] += s;
        auto it = std::lower_bound(a.boxes.begin(), a.boxes.end(), nb, cmp);
        if (it == a.boxes.end() || !(*it == nb)) continue;
        size_t j = size_t(it - a.boxes.begin());
        if (!seen[j]) {
          seen[j] = 1;
          ++reached;
          stack.push_back(j);
        }
      }
    }
  }
  return reached == a.boxes.size();
}

std::string vtx_str(const Vtx& v, int dim) {
  std::string s = "(";
  for (int k = 0; k < dim; ++k) {
    s += std::to_string(v[k]);
    if (k + 1 < dim) s += ",";
  }
  s += ")";
  return s;
}

}  // namespace percolab
