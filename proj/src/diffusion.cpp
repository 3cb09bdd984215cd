#include "scorelab/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace scorelab {

namespace {
void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}
}  // namespace

// --- NoiseSchedule ----------------------------------------------------------

bool NoiseSchedule::terminal_ok() const {
  return std::sqrt(alpha_bar.back()) < terminal_threshold;
}

void NoiseSchedule::validate() const {
  require(!beta.empty(), "schedule: T must be >= 1");
  require(beta.size() == alpha.size() && beta.size() == alpha_bar.size(),
          "schedule: array size mismatch");
  double prev = 1.0;
  for (size_t i = 0; i < beta.size(); ++i) {
    require(beta[i] > 0.0 && beta[i] < 1.0, "schedule: beta out of (0,1)");
    require(std::abs(alpha[i] - (1.0 - beta[i])) <= 1e-15, "schedule: alpha != 1-beta");
    require(alpha_bar[i] < prev, "schedule: alpha_bar must be strictly decreasing");
    require(alpha_bar[i] > 0.0, "schedule: alpha_bar must stay positive");
    prev = alpha_bar[i];
  }
}

NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end,
                                   double terminal_threshold) {
  require(T >= 1, "schedule: T must be >= 1");
  require(beta_start > 0.0 && beta_start < 1.0, "schedule: beta_start out of (0,1)");
  require(beta_end > 0.0 && beta_end < 1.0, "schedule: beta_end out of (0,1)");
  NoiseSchedule s;
  s.terminal_threshold = terminal_threshold;
  s.beta.resize(T);
  s.alpha.resize(T);
  s.alpha_bar.resize(T);
  double prod = 1.0;
  for (int t = 1; t <= T; ++t) {
    double frac = (T == 1) ? 0.0 : static_cast<double>(t - 1) / (T - 1);
    double b = beta_start + (beta_end - beta_start) * frac;
    s.beta[t - 1] = b;
    s.alpha[t - 1] = 1.0 - b;
    prod *= 1.0 - b;
    s.alpha_bar[t - 1] = prod;
  }
  s.validate();
  return s;
}

int find_t_by_sqrt_alpha_bar(const NoiseSchedule& s, double target) {
  require(target > 0.0 && target < 1.0, "find_t: target must be in (0,1)");
  int best_t = 1;
  double best = 1e300;
  for (int t = 1; t <= s.T(); ++t) {
    double diff = std::abs(std::sqrt(s.alpha_bar_at(t)) - target);
    if (diff < best) {
      best = diff;
      best_t = t;
    }
  }
  return best_t;
}

std::string schedule_csv(const NoiseSchedule& s) {
  std::ostringstream os;
  os << "t,beta,alpha,alpha_bar\n";
  os.precision(17);
  for (int t = 1; t <= s.T(); ++t)
    os << t << ',' << s.beta_at(t) << ',' << s.alpha_at(t) << ',' << s.alpha_bar_at(t) << '\n';
  return os.str();
}

// --- Forward ----------------------------------------------------------------

void forward_sample(const double* x0, int dim, int t, const NoiseSchedule& s,
                    Rng& rng, double* out) {
  require(t >= 0 && t <= s.T(), "forward_sample: t out of [0,T]");
  if (t == 0) {
    std::copy(x0, x0 + dim, out);
    return;
  }
  double ab = s.alpha_bar_at(t);
  double sab = std::sqrt(ab), snb = std::sqrt(1.0 - ab);
  for (int i = 0; i < dim; ++i) out[i] = sab * x0[i] + snb * rng.gaussian();
}

// --- PosteriorOracle --------------------------------------------------------

PosteriorOracle::PosteriorOracle(const PointCloudDensity& p, double alpha_bar) {
  p.validate();
  require(alpha_bar > 0.0 && alpha_bar < 1.0, "posterior: alpha_bar must be in (0,1)");
  dim_ = p.dim;
  n_ = p.size();
  ab_ = alpha_bar;
  sab_ = std::sqrt(alpha_bar);
  one_minus_ab_ = 1.0 - alpha_bar;
  scaled_points_.resize(p.points.size());
  for (size_t i = 0; i < p.points.size(); ++i) scaled_points_[i] = sab_ * p.points[i];
  log_mass_.resize(n_);
  for (int k = 0; k < n_; ++k) log_mass_[k] = std::log(p.mass[k]);
  logw_.resize(n_);
}

void PosteriorOracle::posterior_mean(const double* x, double* out) const {
  const double inv2v = 1.0 / (2.0 * one_minus_ab_);
  double lmax = -1e300;
  for (int k = 0; k < n_; ++k) {
    const double* mu = scaled_points_.data() + static_cast<size_t>(k) * dim_;
    double d2 = 0.0;
    for (int i = 0; i < dim_; ++i) {
      double diff = x[i] - mu[i];
      d2 += diff * diff;
    }
    double lw = log_mass_[k] - d2 * inv2v;
    logw_[k] = lw;
    lmax = std::max(lmax, lw);
  }
  double z = 0.0;
  for (int k = 0; k < n_; ++k) {
    logw_[k] = std::exp(logw_[k] - lmax);
    z += logw_[k];
  }
  const double invz = 1.0 / z;
  for (int i = 0; i < dim_; ++i) out[i] = 0.0;
  for (int k = 0; k < n_; ++k) {
    // weights divide by sqrt(abar) once at the end: accumulate over scaled rows
    double wk = logw_[k] * invz;
    const double* mu = scaled_points_.data() + static_cast<size_t>(k) * dim_;
    for (int i = 0; i < dim_; ++i) out[i] += wk * mu[i];
  }
  const double inv_sab = 1.0 / sab_;
  for (int i = 0; i < dim_; ++i) out[i] *= inv_sab;
}

void PosteriorOracle::score_target(const double* x, double* out) const {
  posterior_mean(x, out);
  const double inv = 1.0 / std::sqrt(one_minus_ab_);
  for (int i = 0; i < dim_; ++i) out[i] = (x[i] - sab_ * out[i]) * inv;
}

double PosteriorOracle::log_density(const double* x) const {
  const double inv2v = 1.0 / (2.0 * one_minus_ab_);
  double lmax = -1e300;
  for (int k = 0; k < n_; ++k) {
    const double* mu = scaled_points_.data() + static_cast<size_t>(k) * dim_;
    double d2 = 0.0;
    for (int i = 0; i < dim_; ++i) {
      double diff = x[i] - mu[i];
      d2 += diff * diff;
    }
    logw_[k] = log_mass_[k] - d2 * inv2v;
    lmax = std::max(lmax, logw_[k]);
  }
  double z = 0.0;
  for (int k = 0; k < n_; ++k) z += std::exp(logw_[k] - lmax);
  const double log2pi = 1.8378770664093454836;
  return lmax + std::log(z) - 0.5 * dim_ * (log2pi + std::log(one_minus_ab_));
}

std::vector<double> exact_posterior_mean(const PointCloudDensity& p, const std::vector<double>& x,
                                         int t, const NoiseSchedule& s) {
  require(t >= 1 && t <= s.T(), "exact_posterior_mean: t out of [1,T]");
  require(static_cast<int>(x.size()) == p.dim, "exact_posterior_mean: dim mismatch");
  PosteriorOracle oracle(p, s.alpha_bar_at(t));
  std::vector<double> out(p.dim);
  oracle.posterior_mean(x.data(), out.data());
  return out;
}

std::vector<double> exact_score_target(const PointCloudDensity& p, const std::vector<double>& x,
                                       int t, const NoiseSchedule& s) {
  require(t >= 1 && t <= s.T(), "exact_score_target: t out of [1,T]");
  require(static_cast<int>(x.size()) == p.dim, "exact_score_target: dim mismatch");
  PosteriorOracle oracle(p, s.alpha_bar_at(t));
  std::vector<double> out(p.dim);
  oracle.score_target(x.data(), out.data());
  return out;
}

// --- Reverse ----------------------------------------------------------------

void reverse_step(const double* x, int dim, int t, const double* score,
                  const NoiseSchedule& s, Rng& rng, double* out) {
  require(t >= 1 && t <= s.T(), "reverse_step: t out of [1,T]");
  double at = s.alpha_at(t);
  double ab = s.alpha_bar_at(t);
  double coef = (1.0 - at) / std::sqrt(1.0 - ab);
  double inv_sqrt_at = 1.0 / std::sqrt(at);
  if (t == 1) {
    for (int i = 0; i < dim; ++i) out[i] = inv_sqrt_at * (x[i] - coef * score[i]);
    return;
  }
  double var = s.beta_at(t) * (1.0 - s.alpha_bar_at(t - 1)) / (1.0 - ab);
  double sd = std::sqrt(var);
  for (int i = 0; i < dim; ++i)
    out[i] = inv_sqrt_at * (x[i] - coef * score[i]) + sd * rng.gaussian();
}

std::vector<double> generate(const ScoreFn& score, const NoiseSchedule& s, int dim, int n,
                             uint64_t master_seed) {
  require(n >= 1, "generate: n must be >= 1");
  require(dim >= 1, "generate: dim must be >= 1");
  std::vector<double> out(static_cast<size_t>(n) * dim);
  std::vector<double> x(dim), sc(dim), next(dim);
  for (int c = 0; c < n; ++c) {
    Rng rng(derive_seed(master_seed, static_cast<uint64_t>(c)));
    for (int i = 0; i < dim; ++i) x[i] = rng.gaussian();
    for (int t = s.T(); t >= 1; --t) {
      score(x.data(), t, sc.data());
      for (int i = 0; i < dim; ++i)
        if (!std::isfinite(sc[i]))
          throw std::runtime_error("generate: non-finite score at chain " + std::to_string(c) +
                                   ", t=" + std::to_string(t));
      reverse_step(x.data(), dim, t, sc.data(), s, rng, next.data());
      std::swap(x, next);
    }
    std::copy(x.begin(), x.end(), out.begin() + static_cast<size_t>(c) * dim);
  }
  return out;
}

// --- ForwardSampler ---------------------------------------------------------

ForwardSampler::ForwardSampler(const PointCloudDensity& p, double alpha_bar)
    : p_(&p), cat_(p.mass) {
  require(alpha_bar > 0.0 && alpha_bar < 1.0, "forward sampler: alpha_bar in (0,1)");
  sab_ = std::sqrt(alpha_bar);
  s1mab_ = std::sqrt(1.0 - alpha_bar);
}

void ForwardSampler::draw(Rng& rng, double* out) const {
  const double* x0 = p_->point(cat_.draw(rng));
  for (int i = 0; i < p_->dim; ++i) out[i] = sab_ * x0[i] + s1mab_ * rng.gaussian();
}

// --- Loss decomposition -----------------------------------------------------

LossDecomposition denoising_loss(const ScoreFn& score, const PointCloudDensity& p, int t,
                                 const NoiseSchedule& s, int n_mc, uint64_t seed) {
  require(t >= 1 && t <= s.T(), "denoising_loss: t out of [1,T]");
  require(n_mc >= 2, "denoising_loss: n_mc must be >= 2");
  double ab = s.alpha_bar_at(t);
  PosteriorOracle oracle(p, ab);
  CategoricalSampler cat(p.mass);
  const int dim = p.dim;
  double sab = std::sqrt(ab), snb = std::sqrt(1.0 - ab);
  double ratio = sab / snb;

  Rng rng(seed);
  std::vector<double> x(dim), xi(dim), sc(dim), pm(dim), y(dim);
  double s_tot = 0, s2_tot = 0, s_exc = 0, s2_exc = 0, s_irr = 0, s2_irr = 0, s_cro = 0,
         s2_cro = 0;
  for (int it = 0; it < n_mc; ++it) {
    const double* x0 = p.point(cat.draw(rng));
    for (int i = 0; i < dim; ++i) {
      xi[i] = rng.gaussian();
      x[i] = sab * x0[i] + snb * xi[i];
    }
    score(x.data(), t, sc.data());
    oracle.posterior_mean(x.data(), pm.data());
    double tot = 0, exc = 0, irr = 0, cro = 0;
    for (int i = 0; i < dim; ++i) {
      y[i] = (x[i] - sab * pm[i]) / snb;
      double dt = xi[i] - sc[i];
      double de = y[i] - sc[i];
      double di = ratio * (x0[i] - pm[i]);
      tot += dt * dt;
      exc += de * de;
      irr += di * di;
      cro += de * (xi[i] - y[i]);
    }
    s_tot += tot;
    s2_tot += tot * tot;
    s_exc += exc;
    s2_exc += exc * exc;
    s_irr += irr;
    s2_irr += irr * irr;
    s_cro += cro;
    s2_cro += cro * cro;
  }
  auto finish = [n_mc](double sum, double sum2, double& mean, double& se) {
    mean = sum / n_mc;
    double var = std::max(0.0, sum2 / n_mc - mean * mean);
    se = std::sqrt(var / n_mc);
  };
  LossDecomposition out;
  out.n = n_mc;
  finish(s_tot, s2_tot, out.total, out.se_total);
  finish(s_exc, s2_exc, out.excess, out.se_excess);
  finish(s_irr, s2_irr, out.irreducible, out.se_irreducible);
  finish(s_cro, s2_cro, out.cross, out.se_cross);
  out.cross *= 2.0;  // decomposition: total = excess + irreducible + 2*cross
  out.se_cross *= 2.0;
  return out;
}

std::string samples_csv(const std::vector<double>& samples, int dim) {
  std::ostringstream os;
  os.precision(17);
  for (int i = 0; i < dim; ++i) os << (i ? "," : "") << 'x' << i;
  os << '\n';
  int n = static_cast<int>(samples.size()) / dim;
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < dim; ++i) os << (i ? "," : "") << samples[static_cast<size_t>(k) * dim + i];
    os << '\n';
  }
  return os.str();
}

}  // namespace scorelab
