// Acceptance gate: one self-contained check per numbered criterion, each
// printing exactly one pass/fail line.  Criteria 5 and 6 share one training
// run; criteria 9 and 11 share one checkpoint pool (cached in --work-dir).
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "scorelab/diffusion.hpp"
#include "scorelab/dist.hpp"
#include "scorelab/gen_eval.hpp"
#include "scorelab/io.hpp"
#include "scorelab/ldr.hpp"
#include "scorelab/quadrature.hpp"
#include "scorelab/rng.hpp"
#include "scorelab/theory.hpp"
#include "scorelab/trainer.hpp"

using namespace scorelab;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

PointCloudDensity cloud(const HypercubeDensity& h) {
  PointCloudDensity p;
  p.dim = h.d;
  p.mass = h.mass;
  for (int k = 0; k < h.size(); ++k) {
    auto v = h.vertex(k);
    p.points.insert(p.points.end(), v.begin(), v.end());
  }
  return p;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// --- criterion 1: exact-score generation fidelity ---------------------------

Outcome criterion1() {
  auto t0 = Clock::now();
  const int d = 8, n = 10000;
  PointCloudDensity p = cloud(make_parity(d));
  NoiseSchedule s = make_linear_schedule(1000, 1e-4, 0.02);
  std::vector<PosteriorOracle> bank;
  bank.reserve(s.T());
  for (int t = 1; t <= s.T(); ++t) bank.emplace_back(p, s.alpha_bar_at(t));
  ScoreFn score = [&bank](const double* x, int t, double* out) {
    bank[static_cast<size_t>(t) - 1].score_target(x, out);
  };
  std::vector<double> samples = generate(score, s, d, n, 20260822);

  SymbolicDistribution dist = make_parity_symbolic(d);
  Renderer r = sign_renderer();
  int rule_ok = 0;
  std::unordered_map<std::string, int> counts;
  for (int k = 0; k < n; ++k) {
    auto seq = decode(samples.data() + static_cast<size_t>(k) * d, d, r, 1e9);  // pure sign decode
    if (rule_holds(dist.rule, *seq)) ++rule_ok;
    ++counts[encode_symbols(*seq)];
  }
  double frac = static_cast<double>(rule_ok) / n;

  // TV between the empirical decoded distribution and uniform on the support
  double u = 1.0 / dist.size();
  SymbolSet support;
  for (int k = 0; k < dist.size(); ++k) support.insert(encode_symbols(dist.support[k]));
  double tv = 0.0;
  for (const auto& [key, c] : counts)
    tv += std::abs(static_cast<double>(c) / n - (support.count(key) ? u : 0.0));
  for (const auto& key : support)
    if (!counts.count(key)) tv += u;
  tv *= 0.5;

  double secs = seconds_since(t0);
  bool pass = frac >= 0.99 && tv <= 0.05 && secs <= 120.0;
  return {pass, fmt("rule-satisfying %.2f%% (need >=99%%), tv %.4f (need <=0.05), %.0fs (need <=120)",
                    100.0 * frac, tv, secs)};
}

// --- criterion 2: invariant-set projection forces ratio exactly 1 -----------

Outcome criterion2() {
  PointCloudDensity p = cloud(make_parity(4));
  NoiseSchedule s = make_linear_schedule(1000, 1e-4, 0.02);
  int t = find_t_by_sqrt_alpha_bar(s, std::sqrt(0.5));
  InitConfig ic;
  ic.sigma_init = 0.5;
  ic.seed = 11;
  TwoLayerScoreNet net = init_net(4, 32, t, ic);
  TrainConfig cfg;
  cfg.eta = 2e-3;
  cfg.steps = 300;
  cfg.batch = 128;
  cfg.record_every = 100;
  cfg.t = t;
  cfg.seed = 11;
  cfg.eval_batch = 256;
  train(net, p, s, cfg);
  net.project_to_invariant_set();

  ForwardSampler fsamp(p, s.alpha_bar_at(t));
  const std::vector<std::vector<int>> regions = {{0},       {1},          {2},         {3},
                                                 {0, 1},    {1, 2, 3},    {0, 1, 2, 3}};
  double worst = 0.0;
  for (size_t ri = 0; ri < regions.size(); ++ri) {
    LdrReport rep = ldr_exact(net_jacobian_fn(net), 4, regions[ri], forward_sampler_fn(fsamp),
                              500, 1000 + ri);
    worst = std::max(worst, std::abs(rep.mean - 1.0));
    worst = std::max(worst, rep.se);
  }
  bool pass = worst <= 1e-12;
  return {pass, fmt("worst |ratio-1| over 7 regions x 500 samples = %.2e (need <=1e-12)", worst)};
}

// --- criterion 3: coordinate-independent generation hallucinates at 1/2 -----

Outcome criterion3() {
  const int n = 10000;
  Renderer r = sign_renderer();
  std::vector<double> devs;
  bool pass = true;
  std::string detail;
  for (int d : {4, 8}) {
    SymbolicDistribution dist = make_parity_symbolic(d);
    HypercubeDensity h = make_parity(d);
    SymbolSet train_set = split_train(dist, 0.5, 21);
    GenerationReport rep =
        classify_samples(marginal_sign_samples(h, n, 300 + d), dist, train_set, r, 0.3);
    double f = rep.frac_hallucination();
    pass = pass && std::abs(f - 0.5) <= 0.02 && rep.invalid == 0;
    detail += fmt("marginal d=%d %.4f ", d, f);
  }
  {
    SymbolicDistribution dist = make_parity_symbolic(8);
    SymbolSet train_set = split_train(dist, 0.5, 22);
    GenerationReport rep =
        classify_samples(uniform_sign_samples(8, n, 17), dist, train_set, r, 0.3);
    double f = rep.frac_hallucination();
    pass = pass && std::abs(f - 0.5) <= 0.02;
    detail += fmt("uniform d=8 %.4f ", f);
  }
  detail += "(all need 0.50 +/- 0.02)";
  return {pass, detail};
}

// --- criterion 4: balance conservation scales with the step size ------------

Outcome criterion4() {
  PointCloudDensity p = cloud(make_parity(3));
  NoiseSchedule s = make_linear_schedule(1000, 1e-4, 0.02);
  int t = find_t_by_sqrt_alpha_bar(s, std::sqrt(0.5));
  auto residual_at = [&](double eta) {
    InitConfig ic;
    ic.sigma_init = 0.5;
    ic.seed = 5;
    TwoLayerScoreNet net = init_net(3, 32, t, ic);
    TrainConfig cfg;
    cfg.eta = eta;
    cfg.steps = 200;
    cfg.batch = 64;
    cfg.record_every = 200;
    cfg.t = t;
    cfg.seed = 5;
    cfg.eval_batch = 128;
    train(net, p, s, cfg);
    return net.balance_residual();
  };
  double r1 = residual_at(1e-4);
  double r2 = residual_at(2.5e-5);
  bool pass = r1 <= 1e-3 && r1 >= 4.0 * r2;
  return {pass, fmt("residual %.3e at eta=1e-4 (need <=1e-3), shrink factor %.1f on quartering "
                    "(need >=4)", r1, r1 / r2)};
}

// --- criteria 5 and 6: one alignment run, phase-checked against oracles -----

struct C56Data {
  bool ready = false;
  std::string error;
  double secs = 0.0;
  double ratio0 = 0.0, ratio_star = 0.0;
  int s_star = -1;
  int plateau1_end = -1;
  double ldr = 0.0;
  double lin = 0.0, uni = 0.0;
  PhaseReport phases;
};

// parity d=8, wide net, small init, first coordinate only.  The noise scale
// puts the growth-selected kink offset past the data lumps, so the first
// stall tracks the best-linear level while coordinate alignment still has a
// weak enough cross-coordinate pull to race ahead 10x.  The step budget runs
// the staircase through its third stall at the univariate floor.
constexpr int kC56Dim = 8;
constexpr int kC56Width = 2000;
constexpr double kC56Sigma = 1e-3;
constexpr double kC56SqrtAb = 0.85;
constexpr double kC56Eta = 2e-4;
constexpr int kC56Steps = 400000;
constexpr int kC56RecordEvery = 500;
constexpr uint64_t kC56Seed = 7;

TrainConfig c56_config(int t) {
  TrainConfig cfg;
  cfg.mode = LossMode::full;
  cfg.expectation = ExpectationMode::monte_carlo;
  cfg.eta = kC56Eta;
  cfg.steps = kC56Steps;
  cfg.batch = 128;
  cfg.record_every = kC56RecordEvery;
  cfg.t = t;
  cfg.coords = {0};
  cfg.seed = kC56Seed;
  cfg.eval_batch = 2048;
  cfg.stratified = true;       // cycle the support, antithetic noise pairs
  cfg.snapshot_ratio = 10.5;   // keep a net from the top of the alignment
                               // spike (peak ~11x) rather than the earliest
                               // 10x crossing
  return cfg;
}

const C56Data& get_c56() {
  static C56Data data;
  static bool done = false;
  if (done) return data;
  done = true;
  auto t0 = Clock::now();

  PointCloudDensity p = cloud(make_parity(kC56Dim));
  NoiseSchedule s = make_linear_schedule(1000, 1e-4, 0.02);
  int t = find_t_by_sqrt_alpha_bar(s, kC56SqrtAb);
  InitConfig ic;
  ic.sigma_init = kC56Sigma;
  ic.seed = kC56Seed;
  ic.variant = InitVariant::second_layer_squared;
  TwoLayerScoreNet net = init_net(kC56Dim, kC56Width, t, ic);
  TrainHistory h = train(net, p, s, c56_config(t));
  if (h.aborted) {
    data.error = fmt("training aborted at step %d", h.abort_step);
    return data;
  }

  LinearFitReport lin = best_linear_loss(p, s, t, 0, 200000, 99);
  UnivariateFitReport uni = best_univariate_loss(p, s, t, 0, 200000, 32, 99);
  data.lin = lin.loss;
  data.uni = uni.loss;
  data.phases = detect_phases(h, lin.loss, uni.loss);

  // the run opens on a long stretch at the raw target variance while the net
  // is still tiny; the phases of interest are the matched stalls below it, so
  // "first plateau" means the first one at the linear level
  for (const Plateau& pl : data.phases.plateaus)
    if (pl.label == "linear") {
      data.plateau1_end = pl.end_step;
      break;
    }
  if (data.plateau1_end < 0) {
    data.error = "no linear-level plateau detected";
    return data;
  }

  data.ratio0 = h.records.front().aligned[0] /
                std::max(h.records.front().off_axis[0], 1e-300);
  if (!h.has_snapshot) {
    data.error = "alignment ratio never reached 10x";
    return data;
  }
  data.s_star = h.snapshot_step;
  for (const TrainRecord& r : h.records)
    if (r.step == h.snapshot_step)
      data.ratio_star = r.aligned[0] / std::max(r.off_axis[0], 1e-300);

  ForwardSampler fsamp(p, s.alpha_bar_at(t));
  LdrReport rep = ldr_exact(net_jacobian_fn(h.snapshot), kC56Dim, {0}, forward_sampler_fn(fsamp),
                            2000, 424242);
  data.ldr = rep.mean;
  data.secs = seconds_since(t0);
  data.ready = true;
  return data;
}

Outcome criterion5() {
  const C56Data& c = get_c56();
  if (!c.ready) return {false, c.error};
  bool pass = c.ratio_star >= 10.0 * c.ratio0 && c.s_star <= c.plateau1_end && c.ldr >= 0.9 &&
              c.secs <= 1800.0;
  return {pass, fmt("alignment ratio %.2f -> %.2f (%.0fx) by step %d, before the linear stall "
                    "ends (%d), ldr({0}) %.4f (need >=0.9), %.0fs (need <=1800)",
                    c.ratio0, c.ratio_star, c.ratio_star / c.ratio0, c.s_star, c.plateau1_end,
                    c.ldr, c.secs)};
}

Outcome criterion6() {
  const C56Data& c = get_c56();
  if (!c.ready) return {false, c.error};
  const Plateau* plin = nullptr;
  const Plateau* puni = nullptr;
  for (const Plateau& pl : c.phases.plateaus) {
    if (!plin && pl.label == "linear") plin = &pl;
    if (!puni && pl.label == "univariate") puni = &pl;
  }
  std::string detail = fmt("%zu plateaus;", c.phases.plateaus.size());
  bool pass = plin && puni;
  if (plin)
    detail += fmt(" linear level %.4f vs oracle %.4f (%.1f%%);", plin->level, c.lin,
                  100.0 * std::abs(plin->level - c.lin) / c.lin);
  if (puni)
    detail += fmt(" univariate level %.4f vs oracle %.4f (%.1f%%);", puni->level, c.uni,
                  100.0 * std::abs(puni->level - c.uni) / c.uni);
  if (pass)
    pass = std::abs(plin->level - c.lin) <= 0.15 * c.lin &&
           std::abs(puni->level - c.uni) <= 0.15 * c.uni && plin->start_step < puni->start_step;
  detail += " (both need <=15%)";
  return {pass, detail};
}

// --- criterion 7: growth-rate functional suite ------------------------------

Outcome criterion7() {
  auto t0 = Clock::now();
  PointCloudDensity p = cloud(make_parity(4));
  Rng rng(816);
  auto random_dir = [&rng](std::vector<double>& w, double& b) {
    double n2 = 0.0;
    for (auto& v : w) {
      v = rng.gaussian();
      n2 += v * v;
    }
    b = rng.gaussian();
    n2 += b * b;
    double inv = 1.0 / std::sqrt(n2);
    for (auto& v : w) v *= inv;
    b *= inv;
  };

  // bound |K| <= sqrt(1-ab) at 600 directions
  int bound_ok = 0;
  std::vector<double> w(4);
  double b;
  for (double ab : {0.2, 0.5, 0.9}) {
    TheoryCtx ctx{&p, 0, ab};
    double cap = std::sqrt(1.0 - ab) + 1e-12;
    for (int k = 0; k < 200; ++k) {
      random_dir(w, b);
      if (std::abs(k_eval_quadrature(ctx, w, b)) <= cap) ++bound_ok;
    }
  }

  // odd symmetry within Monte Carlo error on the sign-closed support
  TheoryCtx ctx{&p, 0, 0.5};
  int odd_ok = 0;
  for (int k = 0; k < 20; ++k) {
    random_dir(w, b);
    std::vector<double> wn(4);
    for (int c = 0; c < 4; ++c) wn[c] = -w[c];
    KEstimate k1 = k_eval(ctx, w, b, 50000, 9000 + 2 * k);
    KEstimate k2 = k_eval(ctx, wn, b, 50000, 9001 + 2 * k);
    if (std::abs(k1.k + k2.k) <= 3.0 * std::sqrt(k1.se * k1.se + k2.se * k2.se) + 1e-9) ++odd_ok;
  }

  // aligned value at vanishing noise
  TheoryCtx ctx0{&p, 0, 1e-3};
  std::vector<double> e0 = {1, 0, 0, 0};
  double k_low = k_eval_quadrature(ctx0, e0, 0.0);

  // aligned-ray profile consistency at 20 ratios
  double worst_rel = 0.0;
  for (int k = 1; k <= 20; ++k) {
    double D = 0.25 * k;
    double v = 1.0 / std::sqrt(1.0 + D * D);
    std::vector<double> wa = {v, 0, 0, 0};
    double kq = k_eval_quadrature(ctx, wa, D * v);
    double kf = 0.5 * std::sqrt(1.0 - 0.5) * f_of_d(0.5, D);
    worst_rel = std::max(worst_rel, std::abs(kq - kf) / std::abs(kf));
  }

  // maximizer quality
  double worst_res = 0.0;
  bool grid_ok = true;
  for (double ab : {0.1, 0.5, 0.9}) {
    DStarResult ds = solve_d_star(ab);
    worst_res = std::max(worst_res, ds.grad_residual);
    double grid_best = 0.0;
    for (int k = 1; k <= 2000; ++k) grid_best = std::max(grid_best, f_of_d(ab, 0.005 * k));
    if (ds.f_max < grid_best - 1e-9) grid_ok = false;
  }

  double secs = seconds_since(t0);
  bool pass = bound_ok == 600 && odd_ok == 20 && std::abs(k_low - 0.5) <= 0.01 &&
              worst_rel <= 1e-3 && worst_res <= 1e-7 && grid_ok && secs <= 300.0;
  return {pass, fmt("bound %d/600, odd symmetry %d/20, low-noise aligned %.4f (0.5 +/- 0.01), "
                    "profile rel dev %.1e (<=1e-3), maximizer residual %.1e (<=1e-7), grid %s, "
                    "%.0fs (need <=300)",
                    bound_ok, odd_ok, k_low, worst_rel, worst_res, grid_ok ? "ok" : "FAIL", secs)};
}

// --- criterion 8: exponential growth identity -------------------------------

Outcome criterion8() {
  PointCloudDensity p = cloud(make_parity(3));
  TheoryCtx ctx{&p, 0, 0.5};
  DStarResult ds = solve_d_star(0.5);
  double v = 1.0 / std::sqrt(1.0 + ds.d_star * ds.d_star);
  GrowthReplayConfig cfg;
  cfg.horizon = 0.5;
  cfg.eta = 1e-3;
  cfg.n_mc = 0;
  cfg.gh_nodes = 24;
  cfg.record_every = 100;
  double a0 = 1e-3;

  std::vector<double> on_ray = {a0 * v, 0.0, 0.0};
  GrowthReplayResult r1 = growth_replay(ctx, a0, on_ray, a0 * ds.d_star * v, cfg);
  GrowthReplayResult r2 = growth_replay(ctx, -a0, on_ray, a0 * ds.d_star * v, cfg);
  Rng rng(5150);
  std::vector<double> wg(3);
  double n2 = 0.0;
  for (auto& x : wg) {
    x = rng.gaussian();
    n2 += x * x;
  }
  double bg = rng.gaussian();
  n2 += bg * bg;
  double inv = a0 / std::sqrt(n2);
  for (auto& x : wg) x *= inv;
  bg *= inv;
  GrowthReplayResult r3 = growth_replay(ctx, a0, wg, bg, cfg);

  double worst = std::max({r1.rel_deviation, r2.rel_deviation, r3.rel_deviation});
  bool pass = worst <= 0.02 && r1.final_abs_a > a0 && r2.final_abs_a < a0;
  return {pass, fmt("identity deviation %.2e aligned / %.2e decaying / %.2e generic "
                    "(all need <=0.02)", r1.rel_deviation, r2.rel_deviation, r3.rel_deviation)};
}

// --- shared checkpoint pool for criteria 9 and 11 ---------------------------

struct PoolEntry {
  std::string path;
  int dist_dim = 0;  // parity dimension of the training distribution
};

std::vector<PoolEntry> ensure_pool(const std::string& work_dir) {
  fs::path dir = fs::path(work_dir) / "checkpoints";
  fs::create_directories(dir);
  NoiseSchedule s = make_linear_schedule(1000, 1e-4, 0.02);
  int t = find_t_by_sqrt_alpha_bar(s, std::sqrt(0.5));

  std::vector<PoolEntry> pool;
  auto add = [&](int idx, const TwoLayerScoreNet& net, int dim) {
    std::string path = (dir / fmt("ck_%02d.json", idx)).string();
    if (!fs::exists(path)) save_checkpoint(net, path);
    pool.push_back({path, dim});
  };
  auto trained = [&](int d, int m, double sigma, InitVariant variant, uint64_t seed, int steps,
                     double eta) {
    PointCloudDensity p = cloud(make_parity(d));
    InitConfig ic;
    ic.variant = variant;
    ic.sigma_init = sigma;
    ic.seed = seed;
    TwoLayerScoreNet net = init_net(d, m, t, ic);
    TrainConfig cfg;
    cfg.eta = eta;
    cfg.steps = steps;
    cfg.batch = 64;
    cfg.record_every = std::max(steps, 1);
    cfg.t = t;
    cfg.seed = seed;
    cfg.eval_batch = 64;
    train(net, p, s, cfg);
    return net;
  };
  auto witness = [&](int d, double ratio, int extra_units, double noise_scale, uint64_t seed) {
    InitConfig ic;
    ic.sigma_init = 1.0;
    ic.seed = seed;
    TwoLayerScoreNet net = init_net(d, 2 + extra_units, t, ic);
    for (auto& x : net.a) x = 0.0;
    for (auto& x : net.w) x = 0.0;
    for (auto& x : net.b) x = 0.0;
    double v = 1.0 / std::sqrt(1.0 + ratio * ratio);
    net.a[net.unit(0, 0)] = 1.0;
    net.w_row(0, 0)[0] = v;
    net.b[net.unit(0, 0)] = ratio * v;
    net.a[net.unit(0, 1)] = -1.0;
    net.w_row(0, 1)[0] = -v;
    net.b[net.unit(0, 1)] = ratio * v;
    Rng rng(seed);
    for (int j = 2; j < 2 + extra_units; ++j) {
      net.a[net.unit(0, j)] = noise_scale * rng.gaussian();
      for (int k = 0; k < d; ++k) net.w_row(0, j)[k] = noise_scale * rng.gaussian();
      net.b[net.unit(0, j)] = noise_scale * rng.gaussian();
    }
    return net;
  };

  bool all_cached = true;
  for (int i = 0; i < 20 && all_cached; ++i)
    all_cached = fs::exists(dir / fmt("ck_%02d.json", i));
  if (all_cached) {
    const int dims[20] = {3, 3, 4, 4, 4, 4, 3, 3, 5, 4, 4, 4, 4, 4, 4, 4, 4, 3, 4, 4};
    for (int i = 0; i < 20; ++i)
      pool.push_back({(dir / fmt("ck_%02d.json", i)).string(), dims[i]});
    return pool;
  }

  // 0..9: trained at assorted scales and stages (criterion 9's subjects)
  add(0, trained(3, 16, 0.5, InitVariant::balanced, 101, 100, 2e-3), 3);
  add(1, trained(3, 16, 0.5, InitVariant::balanced, 101, 400, 2e-3), 3);
  add(2, trained(4, 32, 0.3, InitVariant::balanced, 102, 200, 2e-3), 4);
  add(3, trained(4, 32, 0.3, InitVariant::balanced, 102, 800, 2e-3), 4);
  add(4, trained(4, 16, 0.1, InitVariant::second_layer_squared, 103, 100, 2e-3), 4);
  add(5, trained(4, 16, 0.1, InitVariant::second_layer_squared, 103, 300, 2e-3), 4);
  add(6, trained(3, 64, 0.5, InitVariant::balanced, 104, 50, 1e-3), 3);
  add(7, trained(3, 64, 0.5, InitVariant::balanced, 104, 1000, 1e-3), 3);
  add(8, trained(5, 24, 0.4, InitVariant::balanced, 105, 300, 2e-3), 5);
  add(9, trained(4, 48, 1.0, InitVariant::balanced, 106, 600, 1e-3), 4);

  // 10..14: witness-pair structures for the certified bound
  double ab = s.alpha_bar_at(t);
  DStarResult ds = solve_d_star(ab);
  add(10, witness(4, ds.d_star, 0, 0.0, 201), 4);
  add(11, witness(4, 0.7 * ds.d_star, 0, 0.0, 202), 4);
  add(12, witness(4, 1.5 * ds.d_star, 0, 0.0, 203), 4);
  add(13, witness(4, ds.d_star, 4, 2e-4, 204), 4);
  add(14, witness(4, ds.d_star, 8, 5e-4, 205), 4);

  // 15..16: trained and then projected onto the invariant set
  {
    TwoLayerScoreNet net = trained(4, 32, 0.5, InitVariant::balanced, 107, 400, 2e-3);
    net.project_to_invariant_set();
    add(15, net, 4);
    TwoLayerScoreNet net2 = trained(4, 64, 0.3, InitVariant::balanced, 108, 800, 1e-3);
    net2.project_to_invariant_set();
    add(16, net2, 4);
  }
  // 17..19: untrained inits across scales
  {
    InitConfig ic;
    ic.sigma_init = 1e-3;
    ic.seed = 109;
    add(17, init_net(3, 32, t, ic), 3);
    ic.sigma_init = 0.1;
    ic.seed = 110;
    add(18, init_net(4, 32, t, ic), 4);
    ic.sigma_init = 1.0;
    ic.seed = 111;
    add(19, init_net(4, 16, t, ic), 4);
  }
  return pool;
}

// --- criterion 9: zeroth-order probe agrees with exact ratios ---------------

Outcome criterion9(const std::string& work_dir) {
  std::vector<PoolEntry> pool = ensure_pool(work_dir);
  NoiseSchedule s = make_linear_schedule(1000, 1e-4, 0.02);
  double worst = 0.0;
  int warned = 0;
  for (int i = 0; i < 10; ++i) {
    TwoLayerScoreNet net = load_checkpoint(pool[i].path);
    PointCloudDensity p = cloud(make_parity(pool[i].dist_dim));
    ForwardSampler fsamp(p, s.alpha_bar_at(net.t_tag));
    std::vector<int> region = (i % 3 == 2 && net.d >= 2) ? std::vector<int>{0, 1}
                                                         : std::vector<int>{0};
    LdrReport exact = ldr_exact(net_jacobian_fn(net), net.d, region, forward_sampler_fn(fsamp),
                                2000, 7000 + i);
    ZerothOrderReport zo = ldr_zeroth_order(net_vec_fn(net), net.d, region,
                                            forward_sampler_fn(fsamp), 1e-4, 4096, 256, 8000 + i);
    worst = std::max(worst, std::abs(zo.mean - exact.mean));
    if (zo.warn) ++warned;
  }
  bool pass = worst <= 0.1;
  return {pass, fmt("worst |zeroth-order - exact| over 10 checkpoints = %.4f (need <=0.1), "
                    "%d discretization warnings", worst, warned)};
}

// --- criterion 11: certified lower bound is sound ---------------------------

Outcome criterion11(const std::string& work_dir) {
  std::vector<PoolEntry> pool = ensure_pool(work_dir);
  NoiseSchedule s = make_linear_schedule(1000, 1e-4, 0.02);
  int unsound = 0, nontrivial = 0;
  double min_margin = 1e300;
  for (size_t i = 0; i < pool.size(); ++i) {
    TwoLayerScoreNet net = load_checkpoint(pool[i].path);
    PointCloudDensity p = cloud(make_parity(pool[i].dist_dim));
    double ab = s.alpha_bar_at(net.t_tag);
    TheoryCtx ctx{&p, 0, ab};
    LdrBoundReport bound = ldr_lower_bound(net, ctx, 1e-3, 20000, 600 + i);
    ForwardSampler fsamp(p, ab);
    LdrReport exact = ldr_exact(net_jacobian_fn(net), net.d, {0}, forward_sampler_fn(fsamp),
                                2000, 9100 + i);
    double slack = 2.0 * std::sqrt(bound.prob_se * bound.prob_se + exact.se * exact.se);
    double margin = exact.mean - (bound.bound - slack);
    min_margin = std::min(min_margin, margin);
    if (margin < -1e-12) ++unsound;
    if (bound.valid && bound.bound > 0.5) ++nontrivial;
  }
  bool pass = unsound == 0 && nontrivial >= 1;
  return {pass, fmt("%d/20 violations of exact >= bound - 2se (need 0), min margin %.3e, "
                    "%d checkpoints with a certified bound > 0.5 (need >=1)",
                    unsound, min_margin, nontrivial)};
}

// --- criterion 10: low-order structure of the symbolic distributions --------

Outcome criterion10() {
  auto t0 = Clock::now();
  double worst_low = 0.0;
  for (int d = 3; d <= 12; ++d)
    for (const FourierRow& row : fourier_report(make_parity(d)))
      if (row.order >= 1) worst_low = std::max(worst_low, std::abs(row.coeff));

  double worst_inv = 0.0, worst_par = 0.0;
  for (int d = 3; d <= 10; ++d) {
    HypercubeDensity p = make_parity(d);
    std::vector<double> coeff(size_t{1} << d);
    for (uint32_t I = 0; I < (1u << d); ++I) coeff[I] = fourier_coeff(p, I);
    std::vector<double> mass_by_vert(size_t{1} << d, 0.0);
    for (int k = 0; k < p.size(); ++k) mass_by_vert[p.verts[k]] = p.mass[k];
    double sq = 0.0, mass2 = 0.0;
    for (uint32_t x = 0; x < (1u << d); ++x) {
      double rec = 0.0;
      for (uint32_t I = 0; I < (1u << d); ++I) rec += coeff[I] * chi(x, I);
      worst_inv = std::max(worst_inv, std::abs(rec - mass_by_vert[x]));
    }
    for (uint32_t I = 0; I < (1u << d); ++I) sq += coeff[I] * coeff[I];
    for (double m : p.mass) mass2 += m * m;
    worst_par = std::max(worst_par, std::abs(sq - mass2 / std::pow(2.0, d)));
  }

  bool dyck_fails = !check_assumption1(make_dyck(2)).ok;
  double secs = seconds_since(t0);
  bool pass = worst_low <= 1e-12 && worst_inv <= 1e-10 && worst_par <= 1e-10 && dyck_fails &&
              secs <= 60.0;
  return {pass, fmt("low-order coeffs %.1e (<=1e-12), inversion %.1e (<=1e-10), parseval %.1e "
                    "(<=1e-10), balanced-parenthesis rejected %s, %.0fs (need <=60)",
                    worst_low, worst_inv, worst_par, dyck_fails ? "yes" : "NO", secs)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria runner"};
  std::string criteria;
  std::string work_dir = ".";
  app.add_option("--criteria", criteria, "comma-separated criterion numbers (1-11)")->required();
  app.add_option("--work-dir", work_dir, "cache directory shared between criteria");
  CLI11_PARSE(app, argc, argv);

  std::vector<int> ids;
  std::stringstream ss(criteria);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      ids.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      std::fprintf(stderr, "bad criterion id: %s\n", tok.c_str());
      return 2;
    }
  }

  bool all_pass = true;
  for (int id : ids) {
    Outcome out;
    try {
      switch (id) {
        case 1: out = criterion1(); break;
        case 2: out = criterion2(); break;
        case 3: out = criterion3(); break;
        case 4: out = criterion4(); break;
        case 5: out = criterion5(); break;
        case 6: out = criterion6(); break;
        case 7: out = criterion7(); break;
        case 8: out = criterion8(); break;
        case 9: out = criterion9(work_dir); break;
        case 10: out = criterion10(); break;
        case 11: out = criterion11(work_dir); break;
        default:
          std::fprintf(stderr, "unknown criterion %d\n", id);
          return 2;
      }
    } catch (const std::exception& e) {
      out = {false, fmt("exception: %s", e.what())};
    }
    std::printf("criterion %d: %s - %s\n", id, out.pass ? "PASS" : "FAIL", out.detail.c_str());
    std::fflush(stdout);
    all_pass = all_pass && out.pass;
  }
  return all_pass ? 0 : 1;
}
