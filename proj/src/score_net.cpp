#include "scorelab/score_net.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "scorelab/io.hpp"

namespace scorelab {

namespace {
void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}
}  // namespace

void TwoLayerScoreNet::forward(const double* x, double* out) const {
  for (int i = 0; i < d; ++i) out[i] = forward_coord(i, x);
}

double TwoLayerScoreNet::forward_coord(int i, const double* x) const {
  double acc = 0.0;
  const double* wr = w.data() + static_cast<size_t>(i) * m * d;
  const double* ar = a.data() + static_cast<size_t>(i) * m;
  const double* br = b.data() + static_cast<size_t>(i) * m;
  for (int j = 0; j < m; ++j) {
    double z = br[j];
    const double* wj = wr + static_cast<size_t>(j) * d;
    for (int k = 0; k < d; ++k) z += wj[k] * x[k];
    if (z > 0.0) acc += ar[j] * z;
  }
  return acc;
}

void TwoLayerScoreNet::input_jacobian(const double* x, double* J) const {
  for (size_t i = 0; i < static_cast<size_t>(d) * d; ++i) J[i] = 0.0;
  for (int i = 0; i < d; ++i) {
    double* row = J + static_cast<size_t>(i) * d;
    const double* ar = a.data() + static_cast<size_t>(i) * m;
    for (int j = 0; j < m; ++j) {
      const double* wj = w_row(i, j);
      double z = b[unit(i, j)];
      for (int k = 0; k < d; ++k) z += wj[k] * x[k];
      if (z > 0.0) {  // relu'(0) := 0: the boundary contributes nothing
        double aj = ar[j];
        for (int k = 0; k < d; ++k) row[k] += aj * wj[k];
      }
    }
  }
}

double TwoLayerScoreNet::balance_residual() const {
  double worst = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < m; ++j) {
      size_t u = unit(i, j);
      const double* wj = w_row(i, j);
      double n2 = 0.0;
      for (int k = 0; k < d; ++k) n2 += wj[k] * wj[k];
      double res = std::abs(a[u] * a[u] - n2 - b[u] * b[u] - balance_ref[u]);
      if (std::isnan(res)) return res;  // std::max would drop NaN silently
      worst = std::max(worst, res);
    }
  return worst;
}

double TwoLayerScoreNet::m_set_distance(int i) const { return off_axis_norm(i); }

double TwoLayerScoreNet::aligned_norm(int i) const {
  double acc = 0.0;
  for (int j = 0; j < m; ++j) acc += std::abs(a[unit(i, j)] * w_row(i, j)[i]);
  return acc;
}

double TwoLayerScoreNet::off_axis_norm(int i) const {
  double acc = 0.0;
  for (int j = 0; j < m; ++j) {
    const double* wj = w_row(i, j);
    double n2 = 0.0;
    for (int k = 0; k < d; ++k)
      if (k != i) n2 += wj[k] * wj[k];
    acc += std::abs(a[unit(i, j)]) * std::sqrt(n2);
  }
  return acc;
}

void TwoLayerScoreNet::project_to_invariant_set() {
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < m; ++j) {
      double* wj = w_row(i, j);
      double keep = wj[i];
      for (int k = 0; k < d; ++k) wj[k] = 0.0;
      wj[i] = keep;
    }
  // the balance quantity changed discontinuously; re-anchor the reference
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < m; ++j) {
      size_t u = unit(i, j);
      const double* wj = w_row(i, j);
      double n2 = 0.0;
      for (int k = 0; k < d; ++k) n2 += wj[k] * wj[k];
      balance_ref[u] = a[u] * a[u] - n2 - b[u] * b[u];
    }
}

void TwoLayerScoreNet::validate() const {
  require(d >= 1 && d <= 16, "net: d must be in [1,16]");
  require(m >= 1, "net: m must be >= 1");
  size_t dm = static_cast<size_t>(d) * m;
  require(a.size() == dm && b.size() == dm && balance_ref.size() == dm && w.size() == dm * d,
          "net: parameter array size mismatch");
  for (double v : a) require(std::isfinite(v), "net: non-finite parameter");
  for (double v : w) require(std::isfinite(v), "net: non-finite parameter");
  for (double v : b) require(std::isfinite(v), "net: non-finite parameter");
}

TwoLayerScoreNet init_net(int d, int m, int t_tag, const InitConfig& cfg) {
  require(d >= 1 && d <= 16, "init_net: d must be in [1,16]");
  require(m >= 1, "init_net: m must be >= 1");
  require(cfg.sigma_init > 0.0, "init_net: sigma_init must be positive");
  TwoLayerScoreNet net;
  net.d = d;
  net.m = m;
  net.t_tag = t_tag;
  net.init = cfg;
  size_t dm = static_cast<size_t>(d) * m;
  net.a.resize(dm);
  net.w.resize(dm * d);
  net.b.resize(dm);
  net.balance_ref.resize(dm);
  Rng rng(cfg.seed);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < m; ++j) {
      size_t u = net.unit(i, j);
      double* wj = net.w_row(i, j);
      double n2 = 0.0;
      for (int k = 0; k < d; ++k) {
        wj[k] = cfg.sigma_init * rng.gaussian();
        n2 += wj[k] * wj[k];
      }
      if (cfg.variant == InitVariant::balanced) {
        net.b[u] = cfg.sigma_init * cfg.r * rng.gaussian();
        net.a[u] = rng.sign() * std::sqrt(n2 + net.b[u] * net.b[u]);
      } else {
        net.b[u] = 0.0;
        net.a[u] = n2;
      }
      net.balance_ref[u] = net.a[u] * net.a[u] - n2 - net.b[u] * net.b[u];
    }
  return net;
}

// --- Gradients --------------------------------------------------------------

void GradBuffers::resize_like(const TwoLayerScoreNet& net) {
  a.assign(net.a.size(), 0.0);
  w.assign(net.w.size(), 0.0);
  b.assign(net.b.size(), 0.0);
}

void GradBuffers::zero() {
  std::fill(a.begin(), a.end(), 0.0);
  std::fill(w.begin(), w.end(), 0.0);
  std::fill(b.begin(), b.end(), 0.0);
}

namespace {

// Shared accumulation for both losses.  For each sample the per-unit factor is
//   full loss:  g = 2 (s_i(x) - y_i)      surrogate:  g = -2 y_i
// and the contributions are
//   d/da   += g * relu(z),   d/dw += g * a * relu'(z) * x,   d/db += g * a * relu'(z).
// The pre-activation pass runs coordinate-major over a transposed batch so the
// compiler can vectorize across samples — each sample's b + w·x chain keeps its
// own lane and its own k-ascending order.  The gradient pass stays
// sample-sequential per unit: every accumulator receives its contributions in
// batch order.
template <bool Surrogate>
void accumulate(const TwoLayerScoreNet& net, const std::vector<int>& coords, const double* X,
                const double* Y, int batch_size, GradBuffers& g) {
  const int d = net.d, m = net.m;
  const int B = batch_size;
  const double invB = 1.0 / batch_size;
  const size_t nc = coords.size();
  std::vector<double> xt(static_cast<size_t>(d) * B);  // x, coordinate-major
  for (int s = 0; s < B; ++s)
    for (int k = 0; k < d; ++k)
      xt[static_cast<size_t>(k) * B + s] = X[static_cast<size_t>(s) * d + k];
  std::vector<double> z(static_cast<size_t>(m) * B);
  std::vector<double> factor(B);
  for (size_t c = 0; c < nc; ++c) {
    int i = coords[c];
    double* ga = g.a.data() + static_cast<size_t>(i) * m;
    double* gb = g.b.data() + static_cast<size_t>(i) * m;
    double* gw = g.w.data() + static_cast<size_t>(i) * m * d;
    const double* ar = net.a.data() + static_cast<size_t>(i) * m;
    const double* br = net.b.data() + static_cast<size_t>(i) * m;
    const double* wr = net.w.data() + static_cast<size_t>(i) * m * d;
    if (Surrogate) {
      for (int s = 0; s < B; ++s) factor[s] = -2.0 * Y[static_cast<size_t>(s) * nc + c] * invB;
    } else {
      std::fill(factor.begin(), factor.end(), 0.0);  // network output per sample
    }
    for (int j = 0; j < m; ++j) {
      const double* wj = wr + static_cast<size_t>(j) * d;
      double* zj = z.data() + static_cast<size_t>(j) * B;
      const double bj = br[j];
      for (int s = 0; s < B; ++s) zj[s] = bj;
      for (int k = 0; k < d; ++k) {
        const double wk = wj[k];
        const double* xk = xt.data() + static_cast<size_t>(k) * B;
        for (int s = 0; s < B; ++s) zj[s] += wk * xk[s];
      }
      if (!Surrogate) {
        const double aj = ar[j];
        for (int s = 0; s < B; ++s)
          if (zj[s] > 0.0) factor[s] += aj * zj[s];
      }
    }
    if (!Surrogate) {
      for (int s = 0; s < B; ++s)
        factor[s] = 2.0 * (factor[s] - Y[static_cast<size_t>(s) * nc + c]) * invB;
    }
    for (int j = 0; j < m; ++j) {
      const double* zj = z.data() + static_cast<size_t>(j) * B;
      double* gwj = gw + static_cast<size_t>(j) * d;
      const double aj = ar[j];
      for (int s = 0; s < B; ++s) {
        double v = zj[s];
        if (v <= 0.0) continue;
        const double* x = X + static_cast<size_t>(s) * d;
        ga[j] += factor[s] * v;
        double fa = factor[s] * aj;
        gb[j] += fa;
        for (int k = 0; k < d; ++k) gwj[k] += fa * x[k];
      }
    }
  }
}

}  // namespace

void loss_gradients(const TwoLayerScoreNet& net, const std::vector<int>& coords, const double* X,
                    const double* Y, int batch_size, GradBuffers& g) {
  require(batch_size >= 1, "loss_gradients: empty batch");
  g.zero();
  accumulate<false>(net, coords, X, Y, batch_size, g);
}

void surrogate_gradients(const TwoLayerScoreNet& net, const std::vector<int>& coords,
                         const double* X, const double* Y, int batch_size, GradBuffers& g) {
  require(batch_size >= 1, "surrogate_gradients: empty batch");
  g.zero();
  accumulate<true>(net, coords, X, Y, batch_size, g);
}

void apply_step(TwoLayerScoreNet& net, const std::vector<int>& coords, const GradBuffers& g,
                double eta) {
  const int d = net.d, m = net.m;
  for (int i : coords) {
    for (int j = 0; j < m; ++j) {
      size_t u = net.unit(i, j);
      net.a[u] -= eta * g.a[u];
      net.b[u] -= eta * g.b[u];
      double* wj = net.w_row(i, j);
      const double* gwj = g.w.data() + u * d;
      for (int k = 0; k < d; ++k) wj[k] -= eta * gwj[k];
    }
  }
  ++net.steps;
}

// --- Checkpoints ------------------------------------------------------------

std::string checkpoint_to_json(const TwoLayerScoreNet& net) {
  net.validate();
  std::vector<double> flat;
  flat.reserve(net.a.size() + net.w.size() + net.b.size());
  flat.insert(flat.end(), net.a.begin(), net.a.end());
  flat.insert(flat.end(), net.w.begin(), net.w.end());
  flat.insert(flat.end(), net.b.begin(), net.b.end());
  nlohmann::json j;
  j["format"] = "two_layer_score_net_v1";
  j["d"] = net.d;
  j["m"] = net.m;
  j["t_tag"] = net.t_tag;
  j["steps"] = net.steps;
  j["init"] = {{"variant", net.init.variant == InitVariant::balanced ? "balanced"
                                                                    : "second_layer_squared"},
               {"sigma_init", net.init.sigma_init},
               {"r", net.init.r},
               {"seed", net.init.seed}};
  j["params_b64"] = base64_encode(reinterpret_cast<const unsigned char*>(flat.data()),
                                  flat.size() * sizeof(double));
  j["balance_ref_b64"] = base64_encode(reinterpret_cast<const unsigned char*>(net.balance_ref.data()),
                                       net.balance_ref.size() * sizeof(double));
  return j.dump();
}

TwoLayerScoreNet checkpoint_from_json(const std::string& text) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint payload assumes a little-endian host");
  nlohmann::json j = nlohmann::json::parse(text);
  require(j.at("format") == "two_layer_score_net_v1", "checkpoint: unknown format");
  TwoLayerScoreNet net;
  net.d = j.at("d").get<int>();
  net.m = j.at("m").get<int>();
  net.t_tag = j.at("t_tag").get<int>();
  net.steps = j.at("steps").get<int>();
  const auto& init = j.at("init");
  net.init.variant = init.at("variant") == "balanced" ? InitVariant::balanced
                                                      : InitVariant::second_layer_squared;
  net.init.sigma_init = init.at("sigma_init").get<double>();
  net.init.r = init.at("r").get<double>();
  net.init.seed = init.at("seed").get<uint64_t>();
  size_t dm = static_cast<size_t>(net.d) * net.m;
  std::vector<unsigned char> raw = base64_decode(j.at("params_b64").get<std::string>());
  require(raw.size() == (2 * dm + dm * net.d) * sizeof(double),
          "checkpoint: parameter payload size mismatch");
  net.a.resize(dm);
  net.w.resize(dm * net.d);
  net.b.resize(dm);
  const unsigned char* p = raw.data();
  std::memcpy(net.a.data(), p, dm * sizeof(double));
  p += dm * sizeof(double);
  std::memcpy(net.w.data(), p, dm * net.d * sizeof(double));
  p += dm * net.d * sizeof(double);
  std::memcpy(net.b.data(), p, dm * sizeof(double));
  std::vector<unsigned char> ref = base64_decode(j.at("balance_ref_b64").get<std::string>());
  require(ref.size() == dm * sizeof(double), "checkpoint: balance payload size mismatch");
  net.balance_ref.resize(dm);
  std::memcpy(net.balance_ref.data(), ref.data(), ref.size());
  net.validate();
  return net;
}

void save_checkpoint(const TwoLayerScoreNet& net, const std::string& path) {
  write_text_file(path, checkpoint_to_json(net));
}

TwoLayerScoreNet load_checkpoint(const std::string& path) {
  return checkpoint_from_json(read_text_file(path));
}

}  // namespace scorelab
