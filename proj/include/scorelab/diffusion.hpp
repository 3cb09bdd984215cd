#pragma once
#include <functional>
#include <string>
#include <vector>

#include "scorelab/dist.hpp"
#include "scorelab/rng.hpp"

namespace scorelab {

// Discrete-time variance-preserving forward process
//   x_t = sqrt(abar_t) x_0 + sqrt(1 - abar_t) xi,   xi ~ N(0, I),
// with abar_t = prod_{s<=t} (1 - beta_s) and the convention abar_0 = 1.
// Timesteps are 1-based: beta(t), t in [1, T].
struct NoiseSchedule {
  std::vector<double> beta;       // index t-1 holds beta_t
  std::vector<double> alpha;      // 1 - beta_t
  std::vector<double> alpha_bar;  // prod up to t
  double terminal_threshold = 0.05;

  int T() const { return static_cast<int>(beta.size()); }
  double beta_at(int t) const { return beta.at(t - 1); }
  double alpha_at(int t) const { return alpha.at(t - 1); }
  double alpha_bar_at(int t) const { return t == 0 ? 1.0 : alpha_bar.at(t - 1); }
  // Whether sqrt(abar_T) is below the configured threshold, i.e. the terminal
  // marginal is close enough to N(0, I) for generation from pure noise.
  bool terminal_ok() const;
  void validate() const;
};

// beta_t linear from beta_start (t=1) to beta_end (t=T); T=1 uses beta_start.
NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end,
                                   double terminal_threshold = 0.05);

// Timestep whose sqrt(abar_t) is closest to the target (ties -> smaller t).
int find_t_by_sqrt_alpha_bar(const NoiseSchedule& s, double target);

// 'schedule.csv' style table: t,beta,alpha,alpha_bar
std::string schedule_csv(const NoiseSchedule& s);

// x_t from x_0 at timestep t (t = 0 returns x0 unchanged).
void forward_sample(const double* x0, int dim, int t, const NoiseSchedule& s,
                    Rng& rng, double* out);

// ---------------------------------------------------------------------------
// Exact conditional-mean machinery for a finitely supported p_0.
// Binds the support and one timestep; precomputes scaled support rows.
// ---------------------------------------------------------------------------
class PosteriorOracle {
 public:
  PosteriorOracle(const PointCloudDensity& p, double alpha_bar);

  int dim() const { return dim_; }
  double alpha_bar() const { return ab_; }

  // E[x_0 | x_t = x]: softmax over support with weights
  //   w_k oc mass_k * exp(-|x - sqrt(abar) x0_k|^2 / (2 (1-abar))).
  void posterior_mean(const double* x, double* out) const;

  // y_t(x) = (x - sqrt(abar) E[x_0|x]) / sqrt(1-abar); equals E[xi | x_t=x]
  // and -sqrt(1-abar) grad log p_t(x).
  void score_target(const double* x, double* out) const;

  // log p_t(x) of the Gaussian-mixture marginal (for derivative cross-checks).
  double log_density(const double* x) const;

 private:
  int dim_;
  int n_;
  double ab_, sab_, one_minus_ab_;
  std::vector<double> scaled_points_;  // sqrt(abar) * x0_k, row-major
  std::vector<double> log_mass_;
  mutable std::vector<double> logw_;  // scratch, single-threaded use per oracle
};

// Convenience wrappers matching the one-shot call style.
std::vector<double> exact_posterior_mean(const PointCloudDensity& p, const std::vector<double>& x,
                                         int t, const NoiseSchedule& s);
std::vector<double> exact_score_target(const PointCloudDensity& p, const std::vector<double>& x,
                                       int t, const NoiseSchedule& s);

// One ancestral step x_t -> x_{t-1} given the score-target value at (x, t):
//   mean = (x - (1-alpha_t)/sqrt(1-abar_t) * score) / sqrt(alpha_t)
//   var  = beta_t (1 - abar_{t-1}) / (1 - abar_t)   (zero noise at t = 1)
void reverse_step(const double* x, int dim, int t, const double* score,
                  const NoiseSchedule& s, Rng& rng, double* out);

using ScoreFn = std::function<void(const double* x, int t, double* out)>;

// Ancestral sampling of n chains from x_T ~ N(0, I).  Chain c uses the
// derived seed (master_seed, c), so results are independent of evaluation
// order.  Throws std::runtime_error naming the chain and timestep if the
// score function returns a non-finite value.
std::vector<double> generate(const ScoreFn& score, const NoiseSchedule& s, int dim, int n,
                             uint64_t master_seed);

// Draws x_t = sqrt(abar_t) x0 + sqrt(1-abar_t) xi with x0 ~ p.
class ForwardSampler {
 public:
  ForwardSampler(const PointCloudDensity& p, double alpha_bar);
  void draw(Rng& rng, double* out) const;
  int dim() const { return p_->dim; }

 private:
  const PointCloudDensity* p_;
  CategoricalSampler cat_;
  double sab_, s1mab_;
};

// Monte Carlo estimate of the per-timestep denoising loss
//   E |xi - s(x_t)|^2 = E |y_t(x_t) - s(x_t)|^2 + E |y_t(x_t) - xi|^2
// (excess + irreducible; the cross term vanishes in expectation).
struct LossDecomposition {
  double total = 0, excess = 0, irreducible = 0, cross = 0;
  double se_total = 0, se_excess = 0, se_irreducible = 0, se_cross = 0;
  int n = 0;
};

LossDecomposition denoising_loss(const ScoreFn& score, const PointCloudDensity& p, int t,
                                 const NoiseSchedule& s, int n_mc, uint64_t seed);

std::string samples_csv(const std::vector<double>& samples, int dim);

}  // namespace scorelab
