#include "scorelab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "scorelab/quadrature.hpp"
#include "scorelab/theory.hpp"

namespace scorelab {

namespace {
void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Weighted gradient accumulation sharing the layout of score_net's
// loss_gradients, for the exact-expectation grid.
template <bool Surrogate>
void accumulate_weighted(const TwoLayerScoreNet& net, const std::vector<int>& coords,
                         const double* X, const double* Y, const double* W, int n,
                         GradBuffers& g) {
  const int d = net.d, m = net.m;
  g.zero();
  std::vector<double> z(m);
  for (size_t c = 0; c < coords.size(); ++c) {
    int i = coords[c];
    double* ga = g.a.data() + static_cast<size_t>(i) * m;
    double* gb = g.b.data() + static_cast<size_t>(i) * m;
    double* gw = g.w.data() + static_cast<size_t>(i) * m * d;
    const double* ar = net.a.data() + static_cast<size_t>(i) * m;
    const double* br = net.b.data() + static_cast<size_t>(i) * m;
    const double* wr = net.w.data() + static_cast<size_t>(i) * m * d;
    for (int s = 0; s < n; ++s) {
      const double* x = X + static_cast<size_t>(s) * d;
      double out = 0.0;
      for (int j = 0; j < m; ++j) {
        const double* wj = wr + static_cast<size_t>(j) * d;
        double zj = br[j];
        for (int k = 0; k < d; ++k) zj += wj[k] * x[k];
        z[j] = zj;
        if (zj > 0.0) out += ar[j] * zj;
      }
      double y = Y[static_cast<size_t>(s) * coords.size() + c];
      double factor = (Surrogate ? (-2.0 * y) : (2.0 * (out - y))) * W[s];
      for (int j = 0; j < m; ++j) {
        if (z[j] <= 0.0) continue;
        ga[j] += factor * z[j];
        double fa = factor * ar[j];
        gb[j] += fa;
        double* gwj = gw + static_cast<size_t>(j) * d;
        for (int k = 0; k < d; ++k) gwj[k] += fa * x[k];
      }
    }
  }
}

// Unit-outer forward sweep over a transposed sample block: the per-unit
// pre-activation loop vectorizes across samples while each sample's b + w·x
// chain keeps its own lane and k-ascending order, and each out[s] accumulates
// its units j-ascending as in a per-sample forward_coord pass.
double eval_loss(const TwoLayerScoreNet& net, const std::vector<int>& coords, const double* X,
                 const double* Y, const double* W, int n) {
  const int d = net.d, m = net.m;
  const size_t nc = coords.size();
  std::vector<double> xt(static_cast<size_t>(d) * n);  // x, coordinate-major
  for (int s = 0; s < n; ++s)
    for (int k = 0; k < d; ++k)
      xt[static_cast<size_t>(k) * n + s] = X[static_cast<size_t>(s) * d + k];
  std::vector<double> zrow(n);
  std::vector<double> out(n);
  std::vector<double> term(n, 0.0);
  for (size_t c = 0; c < nc; ++c) {
    int i = coords[c];
    std::fill(out.begin(), out.end(), 0.0);
    const double* ar = net.a.data() + static_cast<size_t>(i) * m;
    const double* br = net.b.data() + static_cast<size_t>(i) * m;
    const double* wr = net.w.data() + static_cast<size_t>(i) * m * d;
    for (int j = 0; j < m; ++j) {
      const double* wj = wr + static_cast<size_t>(j) * d;
      const double aj = ar[j], bj = br[j];
      for (int s = 0; s < n; ++s) zrow[s] = bj;
      for (int k = 0; k < d; ++k) {
        const double wk = wj[k];
        const double* xk = xt.data() + static_cast<size_t>(k) * n;
        for (int s = 0; s < n; ++s) zrow[s] += wk * xk[s];
      }
      for (int s = 0; s < n; ++s)
        if (zrow[s] > 0.0) out[s] += aj * zrow[s];
    }
    for (int s = 0; s < n; ++s) {
      double diff = out[s] - Y[static_cast<size_t>(s) * nc + c];
      term[s] += diff * diff;
    }
  }
  double acc = 0.0;
  for (int s = 0; s < n; ++s) acc += W ? W[s] * term[s] : term[s] / n;
  return acc;
}

}  // namespace

TrainHistory train(TwoLayerScoreNet& net, const PointCloudDensity& p, const NoiseSchedule& s,
                   const TrainConfig& cfg) {
  require(cfg.t >= 1 && cfg.t <= s.T(), "train: t out of [1,T]");
  require(cfg.eta > 0.0, "train: eta must be positive");
  require(cfg.steps >= 0, "train: steps must be >= 0");
  require(cfg.record_every >= 1, "train: record_every must be >= 1");
  require(p.dim == net.d, "train: distribution/net dimension mismatch");
  if (cfg.steps == 0) {  // no-op run: net untouched, nothing recorded
    TrainHistory empty;
    empty.coords = cfg.coords;
    return empty;
  }
  std::vector<int> coords = cfg.coords;
  if (coords.empty())
    for (int i = 0; i < net.d; ++i) coords.push_back(i);
  for (size_t i = 0; i < coords.size(); ++i) {
    require(coords[i] >= 0 && coords[i] < net.d, "train: coordinate out of range");
    if (i) require(coords[i] > coords[i - 1], "train: coordinates must be strictly increasing");
  }

  const int d = net.d;
  const int nc = static_cast<int>(coords.size());
  const double ab = s.alpha_bar_at(cfg.t);
  PosteriorOracle oracle(p, ab);
  CategoricalSampler cat(p.mass);
  const double sab = std::sqrt(ab), snb = std::sqrt(1.0 - ab);
  if (cfg.stratified && cfg.expectation == ExpectationMode::monte_carlo) {
    require(cfg.batch % 2 == 0 && cfg.eval_batch % 2 == 0,
            "train: stratified mode needs even batch and eval_batch");
    double lo = p.mass[0], hi = p.mass[0];
    for (double mv : p.mass) {
      lo = std::min(lo, mv);
      hi = std::max(hi, mv);
    }
    require(hi - lo <= 1e-12 * hi, "train: stratified mode needs uniform masses");
  }

  // --- assemble the expectation sample -------------------------------------
  // exact mode: fixed weighted grid (support x tensor quadrature);
  // MC mode: fresh batch per step plus one fixed evaluation set.
  std::vector<double> gridX, gridY, gridW;
  int grid_n = 0;
  if (cfg.expectation == ExpectationMode::exact) {
    require(d <= 4, "train: exact expectation mode requires d <= 4");
    GaussHermite gh = gauss_hermite(cfg.gh_nodes);
    int nodes_per = gh.size();
    long total = 1;
    for (int k = 0; k < d; ++k) total *= nodes_per;
    grid_n = static_cast<int>(total) * p.size();
    gridX.resize(static_cast<size_t>(grid_n) * d);
    gridY.resize(static_cast<size_t>(grid_n) * nc);
    gridW.resize(grid_n);
    std::vector<double> yfull(d);
    int row = 0;
    for (int k0 = 0; k0 < p.size(); ++k0) {
      const double* x0 = p.point(k0);
      for (long node = 0; node < total; ++node) {
        long rem = node;
        double wq = p.mass[k0];
        double* x = gridX.data() + static_cast<size_t>(row) * d;
        for (int k = 0; k < d; ++k) {
          int idx = static_cast<int>(rem % nodes_per);
          rem /= nodes_per;
          x[k] = sab * x0[k] + snb * gh.z[idx];
          wq *= gh.p[idx];
        }
        gridW[row] = wq;
        oracle.score_target(x, yfull.data());
        for (int c = 0; c < nc; ++c) gridY[static_cast<size_t>(row) * nc + c] = yfull[coords[c]];
        ++row;
      }
    }
  }

  std::vector<double> evalX, evalY;
  if (cfg.expectation == ExpectationMode::monte_carlo) {
    require(cfg.batch >= 1, "train: batch must be >= 1");
    require(cfg.eval_batch >= 1, "train: eval_batch must be >= 1");
    Rng erng(derive_seed(cfg.eval_seed ? cfg.eval_seed : cfg.seed, 0xe7a1ull));
    evalX.resize(static_cast<size_t>(cfg.eval_batch) * d);
    evalY.resize(static_cast<size_t>(cfg.eval_batch) * nc);
    std::vector<double> yfull(d), ez(d);
    int ev = 0;
    for (int s_i = 0; s_i < cfg.eval_batch; ++s_i) {
      double* x = evalX.data() + static_cast<size_t>(s_i) * d;
      if (cfg.stratified) {
        const double* x0 = p.point(ev);
        if (s_i % 2 == 0) {
          for (int k = 0; k < d; ++k) {
            ez[k] = erng.gaussian();
            x[k] = sab * x0[k] + snb * ez[k];
          }
        } else {
          for (int k = 0; k < d; ++k) x[k] = sab * x0[k] - snb * ez[k];
          ev = (ev + 1) % p.size();
        }
      } else {
        const double* x0 = p.point(cat.draw(erng));
        for (int k = 0; k < d; ++k) x[k] = sab * x0[k] + snb * erng.gaussian();
      }
      oracle.score_target(x, yfull.data());
      for (int c = 0; c < nc; ++c) evalY[static_cast<size_t>(s_i) * nc + c] = yfull[coords[c]];
    }
  }

  TrainHistory hist;
  hist.coords = coords;
  GradBuffers g;
  g.resize_like(net);

  auto record_state = [&](int step) {
    TrainRecord rec;
    rec.step = step;
    rec.loss = (cfg.expectation == ExpectationMode::exact)
                   ? eval_loss(net, coords, gridX.data(), gridY.data(), gridW.data(), grid_n)
                   : eval_loss(net, coords, evalX.data(), evalY.data(), nullptr,
                               cfg.eval_batch);
    rec.balance_residual = net.balance_residual();
    for (int c = 0; c < nc; ++c) {
      rec.m_dist.push_back(net.m_set_distance(coords[c]));
      rec.aligned.push_back(net.aligned_norm(coords[c]));
      rec.off_axis.push_back(net.off_axis_norm(coords[c]));
    }
    if (cfg.record_k_top) {
      // growth-rate value of the largest-|a| unit of the first trained
      // coordinate, evaluated at its normalized direction
      int i = coords[0];
      int jbest = 0;
      double abest = -1.0;
      for (int j = 0; j < net.m; ++j) {
        double av = std::abs(net.a[net.unit(i, j)]);
        if (av > abest) {
          abest = av;
          jbest = j;
        }
      }
      const double* wj = net.w_row(i, jbest);
      double rho2 = net.b[net.unit(i, jbest)] * net.b[net.unit(i, jbest)];
      for (int k = 0; k < d; ++k) rho2 += wj[k] * wj[k];
      if (rho2 > 0.0) {
        double inv = 1.0 / std::sqrt(rho2);
        std::vector<double> wdir(d);
        for (int k = 0; k < d; ++k) wdir[k] = wj[k] * inv;
        TheoryCtx ctx{&p, coords[0], ab};
        rec.k_top = k_eval_quadrature(ctx, wdir, net.b[net.unit(i, jbest)] * inv);
      }
    }
    if (cfg.snapshot_ratio > 0.0 && !hist.has_snapshot && !hist.records.empty() && nc > 0) {
      const TrainRecord& base = hist.records.front();
      double r0 = base.off_axis[0] > 0.0 ? base.aligned[0] / base.off_axis[0] : 0.0;
      double r1 = rec.off_axis[0] > 0.0 ? rec.aligned[0] / rec.off_axis[0] : 0.0;
      if (r0 > 0.0 && std::isfinite(r1) && r1 >= cfg.snapshot_ratio * r0) {
        hist.snapshot = net;
        hist.snapshot_step = step;
        hist.has_snapshot = true;
      }
    }
    hist.records.push_back(std::move(rec));
  };

  record_state(0);
  TwoLayerScoreNet last_good = net;

  std::vector<double> X(static_cast<size_t>(std::max(cfg.batch, 1)) * d);
  std::vector<double> Y(static_cast<size_t>(std::max(cfg.batch, 1)) * nc);
  std::vector<double> yfull(d), bz(d);
  int bv = 0;
  Rng brng(derive_seed(cfg.seed, 0xba7cull));

  for (int step = 1; step <= cfg.steps; ++step) {
    if (cfg.expectation == ExpectationMode::exact) {
      if (cfg.mode == LossMode::full)
        accumulate_weighted<false>(net, coords, gridX.data(), gridY.data(), gridW.data(), grid_n, g);
      else
        accumulate_weighted<true>(net, coords, gridX.data(), gridY.data(), gridW.data(), grid_n, g);
    } else {
      for (int s_i = 0; s_i < cfg.batch; ++s_i) {
        double* x = X.data() + static_cast<size_t>(s_i) * d;
        if (cfg.stratified) {
          const double* x0 = p.point(bv);
          if (s_i % 2 == 0) {
            for (int k = 0; k < d; ++k) {
              bz[k] = brng.gaussian();
              x[k] = sab * x0[k] + snb * bz[k];
            }
          } else {
            for (int k = 0; k < d; ++k) x[k] = sab * x0[k] - snb * bz[k];
            bv = (bv + 1) % p.size();
          }
        } else {
          const double* x0 = p.point(cat.draw(brng));
          for (int k = 0; k < d; ++k) x[k] = sab * x0[k] + snb * brng.gaussian();
        }
        oracle.score_target(x, yfull.data());
        for (int c = 0; c < nc; ++c) Y[static_cast<size_t>(s_i) * nc + c] = yfull[coords[c]];
      }
      if (cfg.mode == LossMode::full)
        loss_gradients(net, coords, X.data(), Y.data(), cfg.batch, g);
      else
        surrogate_gradients(net, coords, X.data(), Y.data(), cfg.batch, g);
    }
    apply_step(net, coords, g, cfg.eta);

    if (step % cfg.record_every == 0 || step == cfg.steps) {
      record_state(step);
      if (!std::isfinite(hist.records.back().loss) ||
          !std::isfinite(hist.records.back().balance_residual)) {
        hist.records.pop_back();
        hist.aborted = true;
        hist.abort_step = step;
        net = last_good;
        return hist;
      }
      last_good = net;
    }
  }
  return hist;
}

std::string history_csv(const TrainHistory& h) {
  std::ostringstream os;
  os << "step,loss,balance_residual";
  for (int c : h.coords) os << ",m_dist_" << c << ",aligned_" << c << ",off_axis_" << c;
  os << ",k_top\n";
  os.precision(17);
  for (const TrainRecord& r : h.records) {
    os << r.step << ',' << r.loss << ',' << r.balance_residual;
    for (size_t c = 0; c < r.m_dist.size(); ++c)
      os << ',' << r.m_dist[c] << ',' << r.aligned[c] << ',' << r.off_axis[c];
    os << ',' << r.k_top << '\n';
  }
  return os.str();
}

// --- plateau oracles --------------------------------------------------------

LinearFitReport best_linear_loss(const PointCloudDensity& p, const NoiseSchedule& s, int t,
                                 int coord, int n_mc, uint64_t seed) {
  require(t >= 1 && t <= s.T(), "best_linear_loss: t out of [1,T]");
  require(coord >= 0 && coord < p.dim, "best_linear_loss: coord out of range");
  require(n_mc >= p.dim + 2, "best_linear_loss: n_mc too small");
  const int d = p.dim, q = d + 1;
  const double ab = s.alpha_bar_at(t);
  PosteriorOracle oracle(p, ab);
  ForwardSampler fs(p, ab);
  Rng rng(seed);
  // normal equations over the augmented regressor (x, 1)
  std::vector<double> G(static_cast<size_t>(q) * q, 0.0), rhs(q, 0.0);
  std::vector<double> x(d), y(d), feat(q);
  double yy = 0.0;
  for (int it = 0; it < n_mc; ++it) {
    fs.draw(rng, x.data());
    oracle.score_target(x.data(), y.data());
    for (int k = 0; k < d; ++k) feat[k] = x[k];
    feat[d] = 1.0;
    double yv = y[coord];
    yy += yv * yv;
    for (int a = 0; a < q; ++a) {
      rhs[a] += feat[a] * yv;
      for (int b = a; b < q; ++b) G[static_cast<size_t>(a) * q + b] += feat[a] * feat[b];
    }
  }
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < a; ++b)
      G[static_cast<size_t>(a) * q + b] = G[static_cast<size_t>(b) * q + a];

  LinearFitReport rep;
  rep.n = n_mc;
  // solve G u = rhs by Gaussian elimination with partial pivoting; fall back
  // to a small ridge term if the pivot degenerates
  auto solve = [&](double ridge, std::vector<double>& u) -> bool {
    std::vector<double> A = G;
    for (int a = 0; a < q; ++a) A[static_cast<size_t>(a) * q + a] += ridge;
    u = rhs;
    for (int col = 0; col < q; ++col) {
      int piv = col;
      for (int r2 = col + 1; r2 < q; ++r2)
        if (std::abs(A[static_cast<size_t>(r2) * q + col]) >
            std::abs(A[static_cast<size_t>(piv) * q + col]))
          piv = r2;
      if (std::abs(A[static_cast<size_t>(piv) * q + col]) < 1e-12 * n_mc) return false;
      if (piv != col) {
        for (int c2 = 0; c2 < q; ++c2)
          std::swap(A[static_cast<size_t>(piv) * q + c2], A[static_cast<size_t>(col) * q + c2]);
        std::swap(u[piv], u[col]);
      }
      double inv = 1.0 / A[static_cast<size_t>(col) * q + col];
      for (int r2 = col + 1; r2 < q; ++r2) {
        double f = A[static_cast<size_t>(r2) * q + col] * inv;
        if (f == 0.0) continue;
        for (int c2 = col; c2 < q; ++c2)
          A[static_cast<size_t>(r2) * q + c2] -= f * A[static_cast<size_t>(col) * q + c2];
        u[r2] -= f * u[col];
      }
    }
    for (int col = q - 1; col >= 0; --col) {
      double acc = u[col];
      for (int c2 = col + 1; c2 < q; ++c2) acc -= A[static_cast<size_t>(col) * q + c2] * u[c2];
      u[col] = acc / A[static_cast<size_t>(col) * q + col];
    }
    return true;
  };
  std::vector<double> u;
  if (!solve(0.0, u)) {
    rep.ridge_fallback = true;
    if (!solve(1e-10 * n_mc, u))
      throw std::runtime_error("best_linear_loss: normal equations are singular");
  }
  rep.coef.assign(u.begin(), u.begin() + d);
  rep.intercept = u[d];
  // loss = (yy - 2 u.rhs + u.G u) / n
  double quad = 0.0, lin = 0.0;
  for (int a = 0; a < q; ++a) {
    lin += u[a] * rhs[a];
    for (int b = 0; b < q; ++b) quad += u[a] * G[static_cast<size_t>(a) * q + b] * u[b];
  }
  rep.loss = std::max(0.0, (yy - 2.0 * lin + quad) / n_mc);
  return rep;
}

UnivariateFitReport best_univariate_loss(const PointCloudDensity& p, const NoiseSchedule& s, int t,
                                         int coord, int n_mc, int n_bins_start, uint64_t seed,
                                         int max_bins, int bin_coord) {
  require(t >= 1 && t <= s.T(), "best_univariate_loss: t out of [1,T]");
  require(coord >= 0 && coord < p.dim, "best_univariate_loss: coord out of range");
  require(n_bins_start >= 32, "best_univariate_loss: need at least 32 bins");
  require(n_mc >= 100, "best_univariate_loss: n_mc too small");
  if (bin_coord < 0) bin_coord = coord;
  require(bin_coord < p.dim, "best_univariate_loss: bin_coord out of range");
  const int d = p.dim;
  const double ab = s.alpha_bar_at(t);
  PosteriorOracle oracle(p, ab);
  ForwardSampler fs(p, ab);
  Rng rng(seed);
  std::vector<double> xs(n_mc), ys(n_mc), x(d), y(d);
  double lo = 1e300, hi = -1e300, yy = 0.0;
  for (int it = 0; it < n_mc; ++it) {
    fs.draw(rng, x.data());
    oracle.score_target(x.data(), y.data());
    xs[it] = x[bin_coord];
    ys[it] = y[coord];
    lo = std::min(lo, xs[it]);
    hi = std::max(hi, xs[it]);
    yy += ys[it] * ys[it];
  }
  double span = hi - lo;
  require(span > 0.0, "best_univariate_loss: degenerate x range");

  auto loss_at = [&](int nb) -> double {
    std::vector<double> sum(nb, 0.0);
    std::vector<int> cnt(nb, 0);
    for (int it = 0; it < n_mc; ++it) {
      int bin = std::min(nb - 1, static_cast<int>((xs[it] - lo) / span * nb));
      sum[bin] += ys[it];
      ++cnt[bin];
    }
    // loss = E[y^2] - sum_bins cnt/n * mean_bin^2
    double explained = 0.0;
    for (int b2 = 0; b2 < nb; ++b2)
      if (cnt[b2] > 0) explained += sum[b2] * sum[b2] / cnt[b2];
    return std::max(0.0, (yy - explained) / n_mc);
  };

  UnivariateFitReport rep;
  rep.n = n_mc;
  int nb = n_bins_start;
  double prev = loss_at(nb);
  while (true) {
    int nb2 = nb * 2;
    if (nb2 > max_bins) {
      rep.loss = prev;
      rep.prev_loss = prev;
      rep.n_bins = nb;
      rep.converged = false;
      return rep;
    }
    double cur = loss_at(nb2);
    if (std::abs(cur - prev) < 0.02 * std::max(prev, 1e-300)) {
      rep.loss = cur;
      rep.prev_loss = prev;
      rep.n_bins = nb2;
      rep.converged = true;
      return rep;
    }
    prev = cur;
    nb = nb2;
  }
}

// --- phase detection --------------------------------------------------------

PhaseReport detect_phases(const TrainHistory& h, double linear_level, double univariate_level,
                          const PhaseConfig& cfg) {
  PhaseReport rep;
  const auto& recs = h.records;
  const int n = static_cast<int>(recs.size());
  if (n < cfg.window + 1) return rep;

  // flat[r]: the window starting at record r has a small relative slope
  std::vector<char> flat(n, 0);
  for (int r = 0; r + cfg.window < n; ++r) {
    double l0 = recs[r].loss, l1 = recs[r + cfg.window].loss;
    int span = recs[r + cfg.window].step - recs[r].step;
    if (span <= 0) continue;
    double rel = std::abs(l1 - l0) / std::max(std::abs(l0), 1e-300);
    if (rel * 1000.0 / span < cfg.slope_tol) flat[r] = 1;
  }

  struct Interval {
    int first_rec, last_rec;
    double level;
  };
  std::vector<Interval> intervals;
  int r = 0;
  while (r < n) {
    if (!flat[r]) {
      ++r;
      continue;
    }
    int start = r;
    while (r < n && flat[r]) ++r;
    int last = std::min(n - 1, (r - 1) + cfg.window);
    std::vector<double> vals;
    for (int q = start; q <= last; ++q) vals.push_back(recs[q].loss);
    std::sort(vals.begin(), vals.end());
    double median = vals[vals.size() / 2];
    intervals.push_back({start, last, median});
  }
  // merge neighbors at indistinguishable levels (noise can split a plateau)
  std::vector<Interval> merged;
  for (const Interval& iv : intervals) {
    if (!merged.empty()) {
      Interval& back = merged.back();
      double rel = std::abs(iv.level - back.level) / std::max(std::abs(back.level), 1e-300);
      if (rel < cfg.merge_tol) {
        back.last_rec = iv.last_rec;
        std::vector<double> vals;
        for (int q = back.first_rec; q <= back.last_rec; ++q) vals.push_back(recs[q].loss);
        std::sort(vals.begin(), vals.end());
        back.level = vals[vals.size() / 2];
        continue;
      }
    }
    merged.push_back(iv);
  }

  for (const Interval& iv : merged) {
    Plateau p;
    p.start_step = recs[iv.first_rec].step;
    p.end_step = recs[iv.last_rec].step;
    p.level = iv.level;
    double dl = std::abs(p.level - linear_level) / std::max(std::abs(linear_level), 1e-300);
    double du = std::abs(p.level - univariate_level) / std::max(std::abs(univariate_level), 1e-300);
    if (dl <= cfg.label_tol && (du > cfg.label_tol || dl <= du))
      p.label = "linear";
    else if (du <= cfg.label_tol)
      p.label = "univariate";
    else
      p.label = "unmatched";
    rep.plateaus.push_back(p);
  }
  return rep;
}

}  // namespace scorelab
