// Replica statistics: sample mean, standard error, binomial rates.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace percolab {

struct Stat {
  double mean = 0;
  double se = 0;
  int64_t n = 0;
};

inline Stat mean_se(const std::vector<double>& xs) {
  Stat s;
  s.n = int64_t(xs.size());
  if (s.n == 0) return s;
  double m = 0;
  for (double x : xs) m += x;
  m /= double(s.n);
  double v = 0;
  for (double x : xs) v += (x - m) * (x - m);
  s.mean = m;
  s.se = (s.n > 1) ? std::sqrt(v / double(s.n - 1) / double(s.n)) : 0.0;
  return s;
}

inline Stat binomial_rate(int64_t hits, int64_t n) {
  Stat s;
  s.n = n;
  if (n == 0) return s;
  double p = double(hits) / double(n);
  s.mean = p;
  s.se = std::sqrt(p * (1 - p) / double(n));
  return s;
}

inline double joint_se(double a, double b) { return std::sqrt(a * a + b * b); }

}  // namespace percolab
