#pragma once
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "scorelab/diffusion.hpp"
#include "scorelab/score_net.hpp"

namespace scorelab {

// Fills J (row-major d x d) with the input Jacobian of the probed map at x.
using JacobianFn = std::function<void(const double* x, double* J)>;
// Fills out (length d) with the probed map's value at x.
using VecFn = std::function<void(const double* x, double* out)>;
// Draws one probe point (length d).
using SamplerFn = std::function<void(Rng& rng, double* x)>;

// A region is a strictly increasing list of 0-based coordinate indices.
void validate_region(const std::vector<int>& region, int d);

struct LdrReport {
  double mean = 0.0;  // E_x [ |J_R P_R|_F^2 / |J_R|_F^2 ], in [0,1]
  double se = 0.0;
  int n = 0;        // samples used
  int skipped = 0;  // samples with a degenerate (zero) restricted Jacobian
  std::vector<double> saliency;  // mean_k sum_{r in R} J[r][k]^2, length d
};

// Localization ratio from exact Jacobians: rows of J are restricted to the
// region, and the ratio compares the mass of the region-columns block against
// the whole row block.  Samples are drawn from `sampler` with per-index seeds
// derived from `seed`.
LdrReport ldr_exact(const JacobianFn& jac, int d, const std::vector<int>& region,
                    const SamplerFn& sampler, int n, uint64_t seed);

struct ZerothOrderReport {
  double mean = 0.0;
  double se = 0.0;
  double eps = 0.0;
  double mean_eps_halved = 0.0;  // control estimate at eps/2
  double rel_change = 0.0;       // |mean - mean_eps_halved| / max(|mean|, tiny)
  bool warn = false;             // rel_change > 20%
  int n_points = 0;
  int n_probes = 0;
  int skipped = 0;
};

// Derivative-free estimate of the same ratio.  At each probe point x it
// forms forward differences f(x + eps_probe) - f(x) of the region-restricted
// outputs, with isotropic Gaussian probes (per-coordinate std eps) in the
// denominator and region-supported Gaussian probes in the numerator; the
// ratio of mean squared differences estimates the restricted-over-full
// gradient mass directly.  A control pass at eps/2 flags discretization
// trouble (kinks, curvature) when the estimate moves by more than 20%.
ZerothOrderReport ldr_zeroth_order(const VecFn& f, int d, const std::vector<int>& region,
                                   const SamplerFn& sampler, double eps, int n_probes,
                                   int n_points, uint64_t seed);

// Saliency profile at a single point: column masses of the region-restricted
// Jacobian, length d.
std::vector<double> saliency_at(const JacobianFn& jac, int d, const std::vector<int>& region,
                                const double* x);

std::string saliency_csv(const std::vector<double>& saliency);

// Both sides of the union inequality for disjoint regions, reported under
// two conventions:
//  - normalized: each term uses its own region-restricted denominator
//    (the reported LDR definition; the inequality may fail here), and
//  - shared_denominator: all three terms are normalized by the union
//    denominator, which makes the inequality hold pointwise.
struct UnionAdditivityReport {
  double lhs_normalized = 0.0;  // LDR(R1 u R2)
  double r1_normalized = 0.0;
  double r2_normalized = 0.0;
  double lhs_shared = 0.0;
  double r1_shared = 0.0;
  double r2_shared = 0.0;
  bool shared_holds = false;  // lhs_shared >= r1_shared + r2_shared - 1e-12
  int n = 0;
};

UnionAdditivityReport union_additivity_report(const JacobianFn& jac, int d,
                                              const std::vector<int>& r1,
                                              const std::vector<int>& r2,
                                              const SamplerFn& sampler, int n, uint64_t seed);

// Adapters -------------------------------------------------------------------
JacobianFn net_jacobian_fn(const TwoLayerScoreNet& net);
VecFn net_vec_fn(const TwoLayerScoreNet& net);
SamplerFn forward_sampler_fn(const ForwardSampler& fs);

}  // namespace scorelab
