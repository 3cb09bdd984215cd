#pragma once
#include <vector>

namespace scorelab {

// Gauss-Hermite rule expressed against the standard normal: for a degree-n
// rule, E_{z~N(0,1)}[f(z)] ~= sum_i p[i] * f(z[i]), exact for polynomials of
// degree <= 2n-1.  p sums to 1.
struct GaussHermite {
  std::vector<double> z;
  std::vector<double> p;
  int size() const { return static_cast<int>(z.size()); }
};

GaussHermite gauss_hermite(int n);

}  // namespace scorelab
