#include "scorelab/theory.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "scorelab/quadrature.hpp"

namespace scorelab {

namespace {
void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

void check_ctx(const TheoryCtx& ctx) {
  require(ctx.p0 != nullptr, "theory: null distribution");
  require(ctx.coord >= 0 && ctx.coord < ctx.p0->dim, "theory: coord out of range");
  require(ctx.alpha_bar > 0.0 && ctx.alpha_bar < 1.0, "theory: alpha_bar must be in (0,1)");
}

void check_unit_norm(const std::vector<double>& w, double b, int d) {
  require(static_cast<int>(w.size()) == d, "theory: direction dimension mismatch");
  double n2 = b * b;
  for (double v : w) n2 += v * v;
  require(std::abs(n2 - 1.0) <= 1e-10, "theory: direction must satisfy |w|^2 + b^2 = 1");
}
}  // namespace

KEstimate k_eval(const TheoryCtx& ctx, const std::vector<double>& w, double b, int n_mc,
                 uint64_t seed) {
  check_ctx(ctx);
  check_unit_norm(w, b, ctx.p0->dim);
  require(n_mc >= 2, "k_eval: n_mc must be >= 2");
  const PointCloudDensity& p = *ctx.p0;
  const int d = p.dim, i = ctx.coord;
  const double sab = std::sqrt(ctx.alpha_bar), snb = std::sqrt(1.0 - ctx.alpha_bar);
  // support enumeration outside, Monte Carlo over xi inside; one xi draw is
  // shared across support points (common random numbers shrink the variance)
  std::vector<double> wx0(p.size());
  for (int k = 0; k < p.size(); ++k) {
    const double* x0 = p.point(k);
    double acc = 0.0;
    for (int c = 0; c < d; ++c) acc += w[c] * x0[c];
    wx0[k] = sab * acc + b;
  }
  Rng rng(seed);
  std::vector<double> xi(d);
  double sum = 0.0, sum2 = 0.0;
  for (int s = 0; s < n_mc; ++s) {
    for (int c = 0; c < d; ++c) xi[c] = rng.gaussian();
    double wxi = 0.0;
    for (int c = 0; c < d; ++c) wxi += w[c] * xi[c];
    double val = 0.0;
    for (int k = 0; k < p.size(); ++k) {
      double z = wx0[k] + snb * wxi;
      if (z > 0.0) val += p.mass[k] * xi[i] * z;
    }
    sum += val;
    sum2 += val * val;
  }
  KEstimate est;
  est.n = n_mc;
  est.k = sum / n_mc;
  double var = std::max(0.0, sum2 / n_mc - est.k * est.k);
  est.se = std::sqrt(var / n_mc);
  return est;
}

double k_eval_quadrature(const TheoryCtx& ctx, const std::vector<double>& w, double b,
                         int gh_nodes) {
  check_ctx(ctx);
  check_unit_norm(w, b, ctx.p0->dim);
  const PointCloudDensity& p = *ctx.p0;
  const int d = p.dim, i = ctx.coord;
  const double sab = std::sqrt(ctx.alpha_bar), snb = std::sqrt(1.0 - ctx.alpha_bar);
  const double B = snb * w[i];
  if (B == 0.0) return 0.0;
  double off2 = 0.0;
  for (int c = 0; c < d; ++c)
    if (c != i) off2 += w[c] * w[c];
  const double s_off = snb * std::sqrt(off2);
  const double absB = std::abs(B);
  double acc = 0.0;
  if (s_off == 0.0) {
    for (int k = 0; k < p.size(); ++k) {
      const double* x0 = p.point(k);
      double wx = 0.0;
      for (int c = 0; c < d; ++c) wx += w[c] * x0[c];
      acc += p.mass[k] * B * norm_cdf((sab * wx + b) / absB);
    }
    return acc;
  }
  GaussHermite gh = gauss_hermite(gh_nodes);
  for (int k = 0; k < p.size(); ++k) {
    const double* x0 = p.point(k);
    double wx = 0.0;
    for (int c = 0; c < d; ++c) wx += w[c] * x0[c];
    double a0 = sab * wx + b;
    double inner = 0.0;
    for (int q = 0; q < gh.size(); ++q)
      inner += gh.p[q] * norm_cdf((a0 + s_off * gh.z[q]) / absB);
    acc += p.mass[k] * B * inner;
  }
  return acc;
}

double f_of_d(double alpha_bar, double D) {
  require(alpha_bar > 0.0 && alpha_bar < 1.0, "f_of_d: alpha_bar must be in (0,1)");
  double s2n = std::sqrt(2.0 * (1.0 - alpha_bar));
  double shift = std::sqrt(alpha_bar / (2.0 * (1.0 - alpha_bar)));
  return (1.0 + 0.5 * std::erf(D / s2n + shift) + 0.5 * std::erf(D / s2n - shift)) /
         std::sqrt(1.0 + D * D);
}

DStarResult solve_d_star(double alpha_bar) {
  const double lo_edge = 0.0, hi_edge = 50.0;
  double lo = lo_edge, hi = hi_edge;
  const double gr = 0.61803398874989484820;
  double x1 = hi - gr * (hi - lo);
  double x2 = lo + gr * (hi - lo);
  double f1 = f_of_d(alpha_bar, x1), f2 = f_of_d(alpha_bar, x2);
  while (hi - lo > 1e-11) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = f_of_d(alpha_bar, x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = f_of_d(alpha_bar, x1);
    }
  }
  DStarResult res;
  res.d_star = 0.5 * (lo + hi);
  res.f_max = f_of_d(alpha_bar, res.d_star);
  if (res.d_star - lo_edge < 1e-6 || hi_edge - res.d_star < 1e-6)
    throw std::runtime_error("solve_d_star: maximizer at search boundary");
  const double h = 1e-5;
  res.grad_residual =
      std::abs(f_of_d(alpha_bar, res.d_star + h) - f_of_d(alpha_bar, res.d_star - h)) / (2.0 * h);
  return res;
}

// --- growth replay ----------------------------------------------------------

GrowthReplayResult growth_replay(const TheoryCtx& ctx, double a0, const std::vector<double>& w0,
                                 double b0, const GrowthReplayConfig& cfg) {
  check_ctx(ctx);
  const PointCloudDensity& p = *ctx.p0;
  const int d = p.dim, i = ctx.coord;
  require(static_cast<int>(w0.size()) == d, "growth_replay: w0 dimension mismatch");
  double n2 = b0 * b0;
  for (double v : w0) n2 += v * v;
  require(std::abs(a0 * a0 - n2) <= 1e-10, "growth_replay: start must be balanced");
  require(a0 != 0.0, "growth_replay: a0 must be nonzero");
  require(cfg.eta > 0.0 && cfg.horizon > 0.0, "growth_replay: eta and horizon must be positive");

  const double ab = ctx.alpha_bar;
  const double sab = std::sqrt(ab), snb = std::sqrt(1.0 - ab);
  PosteriorOracle oracle(p, ab);
  CategoricalSampler cat(p.mass);

  // exact mode: fixed weighted grid over support x tensor quadrature
  std::vector<double> gridX, gridY, gridW;
  int grid_n = 0;
  if (cfg.n_mc == 0) {
    require(d <= 4, "growth_replay: exact mode requires d <= 4");
    GaussHermite gh = gauss_hermite(cfg.gh_nodes);
    long total = 1;
    for (int k = 0; k < d; ++k) total *= gh.size();
    grid_n = static_cast<int>(total) * p.size();
    gridX.resize(static_cast<size_t>(grid_n) * d);
    gridY.resize(grid_n);
    gridW.resize(grid_n);
    std::vector<double> y(d);
    int row = 0;
    for (int k0 = 0; k0 < p.size(); ++k0) {
      const double* x0 = p.point(k0);
      for (long node = 0; node < total; ++node) {
        long rem = node;
        double wq = p.mass[k0];
        double* x = gridX.data() + static_cast<size_t>(row) * d;
        for (int k = 0; k < d; ++k) {
          int idx = static_cast<int>(rem % gh.size());
          rem /= gh.size();
          x[k] = sab * x0[k] + snb * gh.z[idx];
          wq *= gh.p[idx];
        }
        gridW[row] = wq;
        oracle.score_target(x, y.data());
        gridY[row] = y[i];
        ++row;
      }
    }
  }

  double a = a0, b = b0;
  std::vector<double> w = w0;
  const int steps = static_cast<int>(std::llround(cfg.horizon / cfg.eta));
  require(steps >= 1, "growth_replay: horizon shorter than one step");

  double rho0 = std::sqrt(n2);
  std::vector<double> dir_ref(d + 1);
  for (int k = 0; k < d; ++k) dir_ref[k] = w0[k] / rho0;
  dir_ref[d] = b0 / rho0;

  GrowthReplayResult res;
  Rng rng(derive_seed(cfg.seed, 0x97ull));
  std::vector<double> x(d), y(d), wdir(d);
  double k_int = 0.0;

  auto normalized_k = [&]() -> double {
    double rho2 = b * b;
    for (int k = 0; k < d; ++k) rho2 += w[k] * w[k];
    double inv = 1.0 / std::sqrt(rho2);
    for (int k = 0; k < d; ++k) wdir[k] = w[k] * inv;
    // balance keeps |a| = rho along the flow; normalizing by rho keeps the
    // argument exactly unit-norm under Euler drift
    return k_eval_quadrature(ctx, wdir, b * inv);
  };

  auto dir_dev = [&]() -> double {
    double rho2 = b * b;
    for (int k = 0; k < d; ++k) rho2 += w[k] * w[k];
    double inv = 1.0 / std::sqrt(rho2);
    double acc = 0.0;
    for (int k = 0; k < d; ++k) {
      double diff = w[k] * inv - dir_ref[k];
      acc += diff * diff;
    }
    double diffb = b * inv - dir_ref[d];
    return std::sqrt(acc + diffb * diffb);
  };

  auto record = [&](int step, double kval) {
    GrowthRecord rec;
    rec.s = step * cfg.eta;
    rec.a = a;
    rec.b = b;
    rec.k = kval;
    rec.dir_dev = dir_dev();
    res.records.push_back(rec);
  };

  record(0, normalized_k());

  for (int step = 1; step <= steps; ++step) {
    double kval = normalized_k();
    k_int += cfg.eta * kval;

    double ga = 0.0, gb = 0.0;
    std::vector<double> gw(d, 0.0);
    if (cfg.n_mc == 0) {
      for (int row = 0; row < grid_n; ++row) {
        const double* xr = gridX.data() + static_cast<size_t>(row) * d;
        double z = b;
        for (int k = 0; k < d; ++k) z += w[k] * xr[k];
        if (z <= 0.0) continue;
        double yw = gridY[row] * gridW[row];
        ga += yw * z;
        gb += yw * a;
        for (int k = 0; k < d; ++k) gw[k] += yw * a * xr[k];
      }
    } else {
      for (int s = 0; s < cfg.n_mc; ++s) {
        const double* x0 = p.point(cat.draw(rng));
        for (int k = 0; k < d; ++k) x[k] = sab * x0[k] + snb * rng.gaussian();
        oracle.score_target(x.data(), y.data());
        double z = b;
        for (int k = 0; k < d; ++k) z += w[k] * x[k];
        if (z <= 0.0) continue;
        double yw = y[i] / cfg.n_mc;
        ga += yw * z;
        gb += yw * a;
        for (int k = 0; k < d; ++k) gw[k] += yw * a * x[k];
      }
    }
    // surrogate flow ascends these expectations at rate 2
    a += cfg.eta * 2.0 * ga;
    b += cfg.eta * 2.0 * gb;
    for (int k = 0; k < d; ++k) w[k] += cfg.eta * 2.0 * gw[k];

    if (step % cfg.record_every == 0 || step == steps) record(step, kval);
  }

  res.final_abs_a = std::abs(a);
  res.k_integral = k_int;
  double sgn = a0 > 0.0 ? 1.0 : -1.0;
  res.predicted_abs_a = std::abs(a0) * std::exp(2.0 * sgn * k_int);
  res.rel_deviation =
      std::abs(res.final_abs_a - res.predicted_abs_a) / std::max(res.predicted_abs_a, 1e-300);
  res.final_dir_dev = dir_dev();
  res.final_w = w;
  res.final_b = b;
  return res;
}

std::string growth_csv(const GrowthReplayResult& r) {
  std::ostringstream os;
  os << "s,a,b,k,dir_dev\n";
  os.precision(17);
  for (const GrowthRecord& rec : r.records)
    os << rec.s << ',' << rec.a << ',' << rec.b << ',' << rec.k << ',' << rec.dir_dev << '\n';
  return os.str();
}

// --- localization lower bound -----------------------------------------------

LdrBoundReport ldr_lower_bound(const TwoLayerScoreNet& net, const TheoryCtx& ctx, double k0,
                               int n_mc, uint64_t seed, double k3, double k4) {
  check_ctx(ctx);
  require(net.d == ctx.p0->dim, "ldr_lower_bound: net/distribution dimension mismatch");
  require(k0 >= 0.0, "ldr_lower_bound: k0 must be >= 0");
  require(n_mc >= 2, "ldr_lower_bound: n_mc must be >= 2");
  const int d = net.d, m = net.m, i = ctx.coord;

  LdrBoundReport rep;
  rep.k0 = k0;
  if (k3 < 0.0 || k4 < 0.0) {
    DStarResult ds = solve_d_star(ctx.alpha_bar);
    k3 = 0.5 * ds.d_star;
    k4 = 2.0 * ds.d_star;
  }
  require(k3 > 0.0 && k4 > k3, "ldr_lower_bound: need 0 < k3 < k4");
  rep.k3 = k3;
  rep.k4 = k4;

  // structural scan over the coordinate's units
  double k1 = 0.0;
  int j_plus = -1, j_minus = -1;
  double a_plus = 0.0, a_minus = 0.0;
  for (int j = 0; j < m; ++j) {
    size_t u = net.unit(i, j);
    double aj = net.a[u];
    if (std::abs(aj) <= k0) continue;
    const double* wj = net.w_row(i, j);
    double aligned = (aj > 0.0 ? 1.0 : -1.0) * wj[i];  // sgn(a) * w_i
    if (aligned <= 0.0) {
      rep.diagnostic = "large unit " + std::to_string(j) + " has sign-inconsistent w_i";
      return rep;
    }
    double off2 = 0.0;
    for (int k = 0; k < d; ++k)
      if (k != i) off2 += wj[k] * wj[k];
    k1 = std::max(k1, std::sqrt(off2) / aligned);
    double ratio = net.b[u] / std::abs(wj[i]);
    if (ratio >= k3 && ratio <= k4) {
      if (aj > 0.0 && aj > a_plus) {
        a_plus = aj;
        j_plus = j;
      }
      if (aj < 0.0 && -aj > a_minus) {
        a_minus = -aj;
        j_minus = j;
      }
    }
  }
  rep.k1 = k1;
  if (j_plus < 0 || j_minus < 0) {
    rep.diagnostic = "no qualifying witness pair in the bias-ratio window";
    return rep;
  }
  rep.j_plus = j_plus;
  rep.j_minus = j_minus;
  rep.k2 = std::min(a_plus, a_minus);

  // P(at least one witness active) under x ~ p_t
  ForwardSampler fs(*ctx.p0, ctx.alpha_bar);
  Rng rng(seed);
  std::vector<double> x(d);
  int hits = 0;
  const double* wp = net.w_row(i, j_plus);
  const double* wm = net.w_row(i, j_minus);
  double bp = net.b[net.unit(i, j_plus)], bm = net.b[net.unit(i, j_minus)];
  for (int s = 0; s < n_mc; ++s) {
    fs.draw(rng, x.data());
    double zp = bp, zm = bm;
    for (int k = 0; k < d; ++k) {
      zp += wp[k] * x[k];
      zm += wm[k] * x[k];
    }
    if (zp > 0.0 || zm > 0.0) ++hits;
  }
  rep.prob_est = static_cast<double>(hits) / n_mc;
  rep.prob_se = std::sqrt(rep.prob_est * (1.0 - rep.prob_est) / n_mc);

  double noise = m * k0 * k0 * std::sqrt(1.0 + k4 * k4);
  double num = rep.k2 * rep.k2 - noise;
  double den = rep.k2 * rep.k2 * (1.0 + k1) + noise;
  double core = std::max(num / den, 0.0);
  rep.bound = rep.prob_est * core * core;
  rep.valid = true;
  if (num <= 0.0) rep.diagnostic = "noise floor m k0^2 dominates the witness scale";
  return rep;
}

}  // namespace scorelab
