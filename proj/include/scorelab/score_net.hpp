#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "scorelab/rng.hpp"

namespace scorelab {

// Two-layer ReLU score model with one independent subnetwork per output
// coordinate:
//   s_i(x) = sum_{j<m} a[i][j] * relu(w[i][j] . x + b[i][j]).
// relu'(0) := 0 throughout (forward, Jacobian, gradients).
enum class InitVariant { balanced, second_layer_squared };

struct InitConfig {
  InitVariant variant = InitVariant::balanced;
  double sigma_init = 1e-3;
  double r = 1.0;  // bias std multiplier (balanced variant only)
  uint64_t seed = 0;
};

struct TwoLayerScoreNet {
  int d = 0;
  int m = 0;
  int t_tag = 0;  // timestep this net is trained for
  int steps = 0;  // optimizer steps applied so far
  InitConfig init;
  std::vector<double> a;            // d*m
  std::vector<double> w;            // d*m*d; w[(i*m+j)*d + k]
  std::vector<double> b;            // d*m
  std::vector<double> balance_ref;  // a^2 - |w|^2 - b^2 recorded at init

  size_t unit(int i, int j) const { return static_cast<size_t>(i) * m + j; }
  const double* w_row(int i, int j) const { return w.data() + unit(i, j) * d; }
  double* w_row(int i, int j) { return w.data() + unit(i, j) * d; }

  void forward(const double* x, double* out) const;
  double forward_coord(int i, const double* x) const;
  // J[i*d + k] = d s_i / d x_k
  void input_jacobian(const double* x, double* J) const;

  // max_(i,j) |a^2 - |w|^2 - b^2 - balance_ref|: drift of the conserved
  // per-unit balance away from its value at init.
  double balance_residual() const;
  // sum_j |a[i][j]| * |P_i^perp w[i][j]|: distance from the axis-aligned
  // invariant set for output coordinate i (0 on the set).
  double m_set_distance(int i) const;
  double aligned_norm(int i) const;   // sum_j |a[i][j] * w[i][j][i]|
  double off_axis_norm(int i) const;  // sum_j |a[i][j]| * |P_i^perp w[i][j]|
  // Projects every unit of every coordinate onto the invariant set:
  // w[i][j] <- (w[i][j].e_i) e_i.
  void project_to_invariant_set();

  void validate() const;
};

// balanced: w ~ N(0, sigma^2 I), b ~ N(0, sigma^2 r^2),
//           a = +-1 (fair coin) * sqrt(|w|^2 + b^2)  (zero balance residual).
// second_layer_squared: w ~ N(0, sigma^2 I), b = 0, a = |w|^2.
TwoLayerScoreNet init_net(int d, int m, int t_tag, const InitConfig& cfg);

// Gradients of the empirical loss mean_batch |s(x) - y|^2 restricted to the
// listed output coordinates (units of other coordinates are untouched).
// X is batch_size x d; Y is batch_size x coords.size() (column c holds the
// target for coords[c]).  Gradients are written into ga/gw/gb which have the
// same shapes as net.a/net.w/net.b (entries of unlisted coordinates zeroed).
struct GradBuffers {
  std::vector<double> a, w, b;
  void resize_like(const TwoLayerScoreNet& net);
  void zero();
};

void loss_gradients(const TwoLayerScoreNet& net, const std::vector<int>& coords,
                    const double* X, const double* Y, int batch_size, GradBuffers& g);

// Gradients of the surrogate mean_batch [-2 s(x) . y]; its descent direction
// grows units at rate 2 E[y * relu(...)] independent of the current output.
void surrogate_gradients(const TwoLayerScoreNet& net, const std::vector<int>& coords,
                         const double* X, const double* Y, int batch_size, GradBuffers& g);

// theta <- theta - eta * g for the listed coordinates.
void apply_step(TwoLayerScoreNet& net, const std::vector<int>& coords, const GradBuffers& g,
                double eta);

// Checkpoint: JSON with a base64 little-endian f64 payload, params in
// (a, w, b) order.
std::string checkpoint_to_json(const TwoLayerScoreNet& net);
TwoLayerScoreNet checkpoint_from_json(const std::string& text);
void save_checkpoint(const TwoLayerScoreNet& net, const std::string& path);
TwoLayerScoreNet load_checkpoint(const std::string& path);

}  // namespace scorelab
