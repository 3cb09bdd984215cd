#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scorelab/diffusion.hpp"
#include "scorelab/score_net.hpp"

namespace scorelab {

enum class LossMode { full, surrogate };
enum class ExpectationMode { monte_carlo, exact };

struct TrainConfig {
  LossMode mode = LossMode::full;
  ExpectationMode expectation = ExpectationMode::monte_carlo;
  double eta = 1e-3;
  int steps = 1000;
  int batch = 1024;        // fresh Monte Carlo draws per step
  int record_every = 100;
  int t = 1;               // timestep trained against
  std::vector<int> coords;  // output coordinates to train; empty = all
  uint64_t seed = 0;
  uint64_t eval_seed = 0;  // 0 = derive from seed; set to share a held-out
                           // eval set across segmented runs
  int eval_batch = 8192;  // fixed held-out set for recorded losses (MC mode)
  int gh_nodes = 16;      // exact mode: quadrature nodes per dimension (d<=4)
  bool record_k_top = false;  // growth-rate value of the largest-|a| unit
  bool stratified = false;  // MC mode: cycle support points round-robin and
                            // pair each noise draw with its negation; needs
                            // uniform masses and an even batch
  double snapshot_ratio = 0.0;  // > 0: keep a copy of the net at the first
                                // record where aligned/off_axis on the first
                                // trained coordinate reaches this multiple of
                                // its initial value
};

struct TrainRecord {
  int step = 0;
  double loss = 0.0;  // mean |s - y|^2 over trained coordinates (excess loss)
  double balance_residual = 0.0;
  // one entry per trained coordinate, in cfg order:
  std::vector<double> m_dist;
  std::vector<double> aligned;
  std::vector<double> off_axis;
  double k_top = 0.0;  // only filled when record_k_top
};

struct TrainHistory {
  std::vector<int> coords;
  std::vector<TrainRecord> records;
  bool aborted = false;
  int abort_step = -1;
  bool has_snapshot = false;  // see TrainConfig::snapshot_ratio
  int snapshot_step = -1;
  TwoLayerScoreNet snapshot;
};

// Euler steps of step size eta on the selected loss; targets are the exact
// conditional-mean scores y_t(x_t).  Non-finite values abort the run and roll
// the net back to the last recorded state.
TrainHistory train(TwoLayerScoreNet& net, const PointCloudDensity& p, const NoiseSchedule& s,
                   const TrainConfig& cfg);

std::string history_csv(const TrainHistory& h);

// --- plateau oracles --------------------------------------------------------

struct LinearFitReport {
  double loss = 0.0;           // E (y - <u,x> - c)^2 at the least-squares fit
  std::vector<double> coef;    // length d
  double intercept = 0.0;
  bool ridge_fallback = false;  // normal equations needed regularization
  int n = 0;
};

LinearFitReport best_linear_loss(const PointCloudDensity& p, const NoiseSchedule& s, int t,
                                 int coord, int n_mc, uint64_t seed);

struct UnivariateFitReport {
  double loss = 0.0;  // E (y - E[y | bin(x_coord)])^2 at the finest binning
  int n_bins = 0;     // final bin count
  double prev_loss = 0.0;  // value at half the final bin count
  bool converged = false;  // doubling moved the value by < 2%
  int n = 0;
};

// Piecewise-constant conditional-mean fit of y^(coord) on x^(bin_coord)
// (bin_coord < 0 means bin on coord itself), equal-width bins doubled from
// n_bins_start until the loss changes by < 2% (or max_bins).
UnivariateFitReport best_univariate_loss(const PointCloudDensity& p, const NoiseSchedule& s, int t,
                                         int coord, int n_mc, int n_bins_start, uint64_t seed,
                                         int max_bins = 1024, int bin_coord = -1);

// --- phase detection --------------------------------------------------------

struct PhaseConfig {
  double slope_tol = 1e-3;  // relative loss change per 1000 steps below which
                            // a stretch counts as flat
  int window = 5;           // record intervals per slope estimate
  double label_tol = 0.15;  // relative distance for matching an oracle level
  double merge_tol = 0.05;  // adjacent flat stretches within this rel. gap merge
};

struct Plateau {
  int start_step = 0;
  int end_step = 0;
  double level = 0.0;   // median recorded loss on the plateau
  std::string label;    // "linear", "univariate", or "unmatched"
};

struct PhaseReport {
  std::vector<Plateau> plateaus;
};

PhaseReport detect_phases(const TrainHistory& h, double linear_level, double univariate_level,
                          const PhaseConfig& cfg = {});

}  // namespace scorelab
