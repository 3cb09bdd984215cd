#include "scorelab/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace scorelab {

namespace {

// Orthonormal Hermite value and derivative at t (weight e^{-t^2}); stable up
// to large n, no factorials.
void hermite_orthonormal(int n, double t, double& hn, double& dhn) {
  const double pi_m4 = 0.75112554446494248286;  // pi^(-1/4)
  double hkm1 = 0.0, hk = pi_m4;
  for (int k = 0; k < n; ++k) {
    double hkp1 = t * std::sqrt(2.0 / (k + 1)) * hk - std::sqrt(static_cast<double>(k) / (k + 1)) * hkm1;
    hkm1 = hk;
    hk = hkp1;
  }
  hn = hk;
  dhn = std::sqrt(2.0 * n) * hkm1;
}

}  // namespace

GaussHermite gauss_hermite(int n) {
  if (n < 1 || n > 256) throw std::invalid_argument("gauss_hermite: n out of [1,256]");
  // Bracket roots by scanning the oscillation interval, then polish with
  // Newton.  The scan grid (40 points per root) is dense enough that every
  // sign change isolates exactly one root.
  double bound = std::sqrt(2.0 * n + 1.0) + 1.0;
  int grid = 40 * n;
  std::vector<double> roots;
  double prev_t = -bound, prev_h, prev_dh;
  hermite_orthonormal(n, prev_t, prev_h, prev_dh);
  for (int g = 1; g <= grid; ++g) {
    double t = -bound + 2.0 * bound * g / grid;
    double h, dh;
    hermite_orthonormal(n, t, h, dh);
    if ((prev_h < 0.0) != (h < 0.0)) {
      double root = 0.5 * (prev_t + t);
      for (int it = 0; it < 60; ++it) {
        double hr, dhr;
        hermite_orthonormal(n, root, hr, dhr);
        double step = hr / dhr;
        root -= step;
        if (std::abs(step) < 1e-15) break;
      }
      roots.push_back(root);
    }
    prev_t = t;
    prev_h = h;
  }
  if (static_cast<int>(roots.size()) != n)
    throw std::runtime_error("gauss_hermite: root bracketing failed");
  GaussHermite out;
  out.z.resize(n);
  out.p.resize(n);
  const double sqrt2 = 1.4142135623730950488;
  for (int i = 0; i < n; ++i) {
    double h, dh;
    hermite_orthonormal(n, roots[i], h, dh);
    double w = 2.0 / (dh * dh);         // physicists' weight
    out.z[i] = sqrt2 * roots[i];        // standard-normal abscissa
    out.p[i] = w / 1.7724538509055160273;  // / sqrt(pi): probabilities
  }
  // enforce exact symmetry and unit mass against round-off
  double total = 0.0;
  for (double p : out.p) total += p;
  for (double& p : out.p) p /= total;
  return out;
}

}  // namespace scorelab
