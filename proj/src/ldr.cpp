#include "scorelab/ldr.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace scorelab {

namespace {
void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

constexpr double kDenFloor = 1e-30;
}  // namespace

void validate_region(const std::vector<int>& region, int d) {
  require(!region.empty(), "region: must be non-empty");
  for (size_t i = 0; i < region.size(); ++i) {
    require(region[i] >= 0 && region[i] < d, "region: index out of range");
    if (i) require(region[i] > region[i - 1], "region: indices must be strictly increasing");
  }
}

LdrReport ldr_exact(const JacobianFn& jac, int d, const std::vector<int>& region,
                    const SamplerFn& sampler, int n, uint64_t seed) {
  validate_region(region, d);
  require(n >= 1, "ldr_exact: n must be >= 1");
  std::vector<double> x(d), J(static_cast<size_t>(d) * d);
  std::vector<char> in_region(d, 0);
  for (int r : region) in_region[r] = 1;
  LdrReport rep;
  rep.saliency.assign(d, 0.0);
  double sum = 0.0, sum2 = 0.0;
  for (int s = 0; s < n; ++s) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(s)));
    sampler(rng, x.data());
    jac(x.data(), J.data());
    double num = 0.0, den = 0.0;
    for (int r : region) {
      const double* row = J.data() + static_cast<size_t>(r) * d;
      for (int k = 0; k < d; ++k) {
        double v = row[k] * row[k];
        den += v;
        if (in_region[k]) num += v;
      }
    }
    if (den <= kDenFloor) {
      ++rep.skipped;
      continue;
    }
    double ratio = num / den;
    sum += ratio;
    sum2 += ratio * ratio;
    for (int k = 0; k < d; ++k) {
      double col = 0.0;
      for (int r : region) {
        double v = J[static_cast<size_t>(r) * d + k];
        col += v * v;
      }
      rep.saliency[k] += col;
    }
    ++rep.n;
  }
  if (rep.n == 0) throw std::runtime_error("ldr_exact: all samples had degenerate Jacobians");
  rep.mean = sum / rep.n;
  double var = std::max(0.0, sum2 / rep.n - rep.mean * rep.mean);
  rep.se = std::sqrt(var / rep.n);
  for (double& v : rep.saliency) v /= rep.n;
  return rep;
}

namespace {

// one zeroth-order pass at a fixed eps; returns mean over points of the
// per-point ratio of mean squared forward differences (region probes over
// isotropic probes)
void zeroth_pass(const VecFn& f, int d, const std::vector<int>& region, const SamplerFn& sampler,
                 double eps, int n_probes, int n_points, uint64_t seed, double& mean, double& se,
                 int& skipped) {
  const int dr = static_cast<int>(region.size());
  std::vector<double> x(d), xp(d), f0(d), fp(d);
  double sum = 0.0, sum2 = 0.0;
  int used = 0;
  skipped = 0;
  for (int pt = 0; pt < n_points; ++pt) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(pt)));
    sampler(rng, x.data());
    f(x.data(), f0.data());
    double num = 0.0, den = 0.0;
    // isotropic probes
    for (int q = 0; q < n_probes; ++q) {
      for (int k = 0; k < d; ++k) xp[k] = x[k] + eps * rng.gaussian();
      f(xp.data(), fp.data());
      for (int r : region) {
        double dlt = fp[r] - f0[r];
        den += dlt * dlt;
      }
    }
    // region-supported probes
    for (int q = 0; q < n_probes; ++q) {
      for (int k = 0; k < d; ++k) xp[k] = x[k];
      for (int r : region) xp[r] += eps * rng.gaussian();
      f(xp.data(), fp.data());
      for (int r : region) {
        double dlt = fp[r] - f0[r];
        num += dlt * dlt;
      }
    }
    (void)dr;
    if (den <= kDenFloor * n_probes) {
      ++skipped;
      continue;
    }
    double ratio = num / den;
    sum += ratio;
    sum2 += ratio * ratio;
    ++used;
  }
  if (used == 0) throw std::runtime_error("ldr_zeroth_order: all points degenerate");
  mean = sum / used;
  double var = std::max(0.0, sum2 / used - mean * mean);
  se = std::sqrt(var / used);
}

}  // namespace

ZerothOrderReport ldr_zeroth_order(const VecFn& f, int d, const std::vector<int>& region,
                                   const SamplerFn& sampler, double eps, int n_probes,
                                   int n_points, uint64_t seed) {
  validate_region(region, d);
  require(eps > 0.0, "ldr_zeroth_order: eps must be positive");
  require(n_probes >= 2, "ldr_zeroth_order: n_probes must be >= 2");
  require(n_points >= 1, "ldr_zeroth_order: n_points must be >= 1");
  ZerothOrderReport rep;
  rep.eps = eps;
  rep.n_points = n_points;
  rep.n_probes = n_probes;
  double se_half = 0.0;
  int skip_half = 0;
  zeroth_pass(f, d, region, sampler, eps, n_probes, n_points, seed, rep.mean, rep.se, rep.skipped);
  zeroth_pass(f, d, region, sampler, 0.5 * eps, n_probes, n_points, derive_seed(seed, 0x48414c46ull),
              rep.mean_eps_halved, se_half, skip_half);
  rep.rel_change = std::abs(rep.mean - rep.mean_eps_halved) / std::max(std::abs(rep.mean), 1e-12);
  rep.warn = rep.rel_change > 0.20;
  return rep;
}

std::vector<double> saliency_at(const JacobianFn& jac, int d, const std::vector<int>& region,
                                const double* x) {
  validate_region(region, d);
  std::vector<double> J(static_cast<size_t>(d) * d), out(d, 0.0);
  jac(x, J.data());
  for (int k = 0; k < d; ++k)
    for (int r : region) {
      double v = J[static_cast<size_t>(r) * d + k];
      out[k] += v * v;
    }
  return out;
}

std::string saliency_csv(const std::vector<double>& saliency) {
  std::ostringstream os;
  os << "coordinate,mass\n";
  os.precision(17);
  for (size_t k = 0; k < saliency.size(); ++k) os << k << ',' << saliency[k] << '\n';
  return os.str();
}

UnionAdditivityReport union_additivity_report(const JacobianFn& jac, int d,
                                              const std::vector<int>& r1,
                                              const std::vector<int>& r2,
                                              const SamplerFn& sampler, int n, uint64_t seed) {
  validate_region(r1, d);
  validate_region(r2, d);
  for (int i : r1)
    for (int j : r2) require(i != j, "union_additivity: regions must be disjoint");
  std::vector<int> u;
  u.insert(u.end(), r1.begin(), r1.end());
  u.insert(u.end(), r2.begin(), r2.end());
  std::sort(u.begin(), u.end());

  auto block_masses = [d](const double* J, const std::vector<int>& rows, double& num,
                          double& den) {
    std::vector<char> in(d, 0);
    for (int r : rows) in[r] = 1;
    num = den = 0.0;
    for (int r : rows) {
      const double* row = J + static_cast<size_t>(r) * d;
      for (int k = 0; k < d; ++k) {
        double v = row[k] * row[k];
        den += v;
        if (in[k]) num += v;
      }
    }
  };

  UnionAdditivityReport rep;
  std::vector<double> x(d), J(static_cast<size_t>(d) * d);
  double s_lhs_n = 0, s_r1_n = 0, s_r2_n = 0, s_lhs_s = 0, s_r1_s = 0, s_r2_s = 0;
  int used = 0;
  for (int s = 0; s < n; ++s) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(s)));
    sampler(rng, x.data());
    jac(x.data(), J.data());
    double num_u, den_u, num_1, den_1, num_2, den_2;
    block_masses(J.data(), u, num_u, den_u);
    block_masses(J.data(), r1, num_1, den_1);
    block_masses(J.data(), r2, num_2, den_2);
    if (den_u <= kDenFloor || den_1 <= kDenFloor || den_2 <= kDenFloor) continue;
    s_lhs_n += num_u / den_u;
    s_r1_n += num_1 / den_1;
    s_r2_n += num_2 / den_2;
    s_lhs_s += num_u / den_u;
    s_r1_s += num_1 / den_u;
    s_r2_s += num_2 / den_u;
    ++used;
  }
  if (used == 0) throw std::runtime_error("union_additivity: all samples degenerate");
  rep.n = used;
  rep.lhs_normalized = s_lhs_n / used;
  rep.r1_normalized = s_r1_n / used;
  rep.r2_normalized = s_r2_n / used;
  rep.lhs_shared = s_lhs_s / used;
  rep.r1_shared = s_r1_s / used;
  rep.r2_shared = s_r2_s / used;
  rep.shared_holds = rep.lhs_shared >= rep.r1_shared + rep.r2_shared - 1e-12;
  return rep;
}

JacobianFn net_jacobian_fn(const TwoLayerScoreNet& net) {
  return [&net](const double* x, double* J) { net.input_jacobian(x, J); };
}

VecFn net_vec_fn(const TwoLayerScoreNet& net) {
  return [&net](const double* x, double* out) { net.forward(x, out); };
}

SamplerFn forward_sampler_fn(const ForwardSampler& fs) {
  return [&fs](Rng& rng, double* x) { fs.draw(rng, x); };
}

}  // namespace scorelab
