#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "scorelab/diffusion.hpp"
#include "scorelab/score_net.hpp"

namespace scorelab {

// Context for single-unit analysis: a finitely supported p0 (ambient points),
// the output coordinate under study, and the noise level of the timestep.
struct TheoryCtx {
  const PointCloudDensity* p0 = nullptr;
  int coord = 0;
  double alpha_bar = 0.5;
};

// Growth-rate functional of a unit-norm direction (|w|^2 + b^2 = 1):
//   K(w, b) = E[ xi_i * relu(w . x_t + b) ],  x_t = sqrt(ab) x0 + sqrt(1-ab) xi.
// Closed form via conditioning on (x0, off-axis noise):
//   K = E[ B * Phi(A / |B|) ],  A = sqrt(ab) w.x0 + sqrt(1-ab) w.P_i xi + b,
//                               B = sqrt(1-ab) w_i,
// with K = 0 exactly when B = 0.  Positive-mass direction <=> w_i > 0.
struct KEstimate {
  double k = 0.0;
  double se = 0.0;
  int n = 0;
};

// Monte Carlo over xi, exact enumeration over the x0 support.  Throws if
// |w|^2 + b^2 deviates from 1 by more than 1e-10.
KEstimate k_eval(const TheoryCtx& ctx, const std::vector<double>& w, double b, int n_mc,
                 uint64_t seed);

// Same expectation with the off-axis noise reduced to its 1-d projection and
// integrated by Gauss-Hermite quadrature (the only xi-dependence is through
// w . P_i xi); deterministic, accurate to quadrature error.
double k_eval_quadrature(const TheoryCtx& ctx, const std::vector<double>& w, double b,
                         int gh_nodes = 64);

// Closed-form growth profile along the coordinate-aligned ray with
// bias-to-weight ratio D (unbiased +-1 marginal on the coordinate):
//   f(D) = (1+D^2)^(-1/2) (1 + erf(D/sqrt(2(1-ab)) + sqrt(ab/(2(1-ab))))/2
//                            + erf(D/sqrt(2(1-ab)) - sqrt(ab/(2(1-ab))))/2)
// and K on that ray equals sqrt(1-ab)/2 * f(D).
double f_of_d(double alpha_bar, double D);

struct DStarResult {
  double d_star = 0.0;
  double f_max = 0.0;
  double grad_residual = 0.0;  // |f'(d_star)| by central differences
};

// Maximizes f over (0, 50] by golden-section (f is unimodal there); errors
// if the maximizer sits at the search boundary.
DStarResult solve_d_star(double alpha_bar);

// --- single-unit growth replay ---------------------------------------------

struct GrowthReplayConfig {
  double horizon = 1.0;  // flow time integrated
  double eta = 1e-3;     // Euler step size
  int n_mc = 1024;       // fresh draws per step; 0 = exact tensor quadrature (d<=4)
  int gh_nodes = 16;     // exact mode: nodes per dimension
  int record_every = 10;
  uint64_t seed = 0;
};

struct GrowthRecord {
  double s = 0.0;  // flow time
  double a = 0.0;
  double b = 0.0;
  double k = 0.0;        // quadrature growth rate at the normalized direction
  double dir_dev = 0.0;  // |(w,b)/rho - (w0,b0)/rho0|
};

struct GrowthReplayResult {
  std::vector<GrowthRecord> records;
  double final_abs_a = 0.0;
  double predicted_abs_a = 0.0;  // |a0| exp(2 sgn(a0) int K)
  double rel_deviation = 0.0;
  double k_integral = 0.0;
  double final_dir_dev = 0.0;
  std::vector<double> final_w;
  double final_b = 0.0;
};

// Integrates the single-unit surrogate flow
//   da/ds = 2 E[y_i relu(w.x+b)], dw/ds = 2 a E[y_i relu'(w.x+b) x],
//   db/ds = 2 a E[y_i relu'(w.x+b)]
// by Euler steps while accumulating int K ds along the normalized direction;
// checks the exponential-growth identity |a(S)| = |a(0)| e^{2 sgn(a0) int K}.
// Requires a balanced start: |a0^2 - |w0|^2 - b0^2| <= 1e-10.
GrowthReplayResult growth_replay(const TheoryCtx& ctx, double a0, const std::vector<double>& w0,
                                 double b0, const GrowthReplayConfig& cfg);

std::string growth_csv(const GrowthReplayResult& r);

// --- localization lower bound -----------------------------------------------

struct LdrBoundReport {
  bool valid = false;     // a qualifying structure was found
  double bound = 0.0;     // 0 when invalid
  double k0 = 0.0;        // magnitude below which units count as negligible
  double k1 = 0.0;        // worst off-axis/aligned ratio among large units
  double k2 = 0.0;        // min witness |a|
  double k3 = 0.0, k4 = 0.0;  // bias-ratio window
  double prob_est = 0.0;  // P(at least one witness active), x ~ p_t
  double prob_se = 0.0;
  int j_plus = -1, j_minus = -1;  // witness unit indices
  std::string diagnostic;
};

// Certified lower bound for the single-coordinate localization ratio of the
// subnetwork for ctx.coord:
//   bound = prob_est * max((k2^2 - m k0^2 sqrt(1+k4^2)) /
//                          (k2^2 (1+k1) + m k0^2 sqrt(1+k4^2)), 0)^2
// where every unit with |a| > k0 must be sign-consistently aligned (its
// off-axis mass at most k1 times a w_i of matching sign) and the witnesses
// are the largest positive-a and negative-a units whose b/|w_i| falls in
// [k3, k4] (defaults D*/2 and 2 D*).  Returns bound 0 with a diagnostic when
// the structure does not hold.
LdrBoundReport ldr_lower_bound(const TwoLayerScoreNet& net, const TheoryCtx& ctx, double k0,
                               int n_mc, uint64_t seed, double k3 = -1.0, double k4 = -1.0);

}  // namespace scorelab
