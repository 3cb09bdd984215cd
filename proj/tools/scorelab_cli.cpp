// Command-line driver: builds distributions, trains score nets, probes
// localization, evaluates generation, and writes every artifact with a
// manifest (config hash, seed, versions, wall time) for reproducibility.
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "scorelab/diffusion.hpp"
#include "scorelab/dist.hpp"
#include "scorelab/gen_eval.hpp"
#include "scorelab/io.hpp"
#include "scorelab/ldr.hpp"
#include "scorelab/score_net.hpp"
#include "scorelab/theory.hpp"
#include "scorelab/trainer.hpp"

namespace sl = scorelab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// config plumbing
// ---------------------------------------------------------------------------

json default_config() {
  return json{
      {"seed", 12345},
      {"distribution",
       {{"rule", "parity"}, {"length", 8}, {"half_length", 4}, {"base", 10}, {"renderer", "sign"}}},
      {"schedule", {{"T", 1000}, {"beta_start", 1e-4}, {"beta_end", 0.02}}},
      {"train",
       {{"sqrt_alpha_bar", 0.5},
        {"t", 0},  // 0 = pick t from sqrt_alpha_bar
        {"m", 2000},
        {"sigma_init", 1e-3},
        {"bias_scale", 1.0},
        {"init", "balanced"},
        {"mode", "full"},
        {"expectation", "monte_carlo"},
        {"eta", 1e-6},
        {"steps", 2000000},
        {"batch", 1024},
        {"record_every", 1000},
        {"coords", json::array()},  // empty = all output coordinates
        {"eval_batch", 8192},
        {"gh_nodes", 16},
        {"snapshots", 10},
        {"oracle_mc", 200000},
        {"record_k_top", false},
        {"stratified", false},
        {"snapshot_ratio", 0.0}}},
      {"probe",
       {{"regions", json::array({json::array({0})})},
        {"sqrt_alpha_bar", json::array({0.5})},
        {"eps", 1e-4},
        {"n_probes", 4096},
        {"n_points", 64},
        {"n_samples", 4096},
        {"checkpoints", json::array()}}},
      {"theory",
       {{"alpha_bar", json::array({0.1, 0.5, 0.9})},
        {"replay",
         {{"scale", 1e-3}, {"horizon", 1.0}, {"eta", 1e-3}, {"n_mc", 2048}, {"gh_nodes", 16},
          {"record_every", 10}}}}},
      {"eval",
       {{"n_samples", 10000},
        {"tau", 0.5},
        {"split_fraction", 1.0},
        {"split_seed", 7},
        {"checkpoints", json::array()}}},
      {"sample", {{"n_samples", 10000}}},
  };
}

json deep_merge(json base, const json& over) {
  if (!base.is_object() || !over.is_object()) return over;
  for (auto it = over.begin(); it != over.end(); ++it)
    base[it.key()] = base.contains(it.key()) ? deep_merge(base[it.key()], it.value()) : it.value();
  return base;
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
};

void add_common(CLI::App* sub, CommonOpts& c) {
  sub->add_option("-c,--config", c.config_path, "Config file (.toml or .json)");
  sub->add_option("-o,--out", c.out_dir, "Output directory");
  auto* s = sub->add_option("-s,--seed", c.seed, "Master seed (overrides config)");
  sub->parse_complete_callback([&c, s] { c.seed_set = s->count() > 0; });
  sub->add_option("-t,--threads", c.threads, "Worker threads for independent jobs")
      ->check(CLI::PositiveNumber);
}

// Effective config = defaults <- file <- --seed override.
json effective_config(const CommonOpts& c) {
  json cfg = default_config();
  if (!c.config_path.empty()) cfg = deep_merge(cfg, sl::load_config_file(c.config_path));
  if (c.seed_set) cfg["seed"] = c.seed;
  return cfg;
}

// ---------------------------------------------------------------------------
// artifact bookkeeping: every file a run writes lands in exactly one manifest
// ---------------------------------------------------------------------------

class ArtifactSink {
 public:
  ArtifactSink(std::string command, const json& cfg, const fs::path& root)
      : command_(std::move(command)), cfg_(cfg), root_(root),
        start_(std::chrono::steady_clock::now()) {
    fs::create_directories(root_);
  }

  void write(const std::string& rel, const std::string& content) {
    fs::path p = root_ / rel;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    sl::write_text_file(p.string(), content);
    artifacts_.push_back(rel);
  }

  // Registers a file written directly by library code (checkpoints).
  void note(const std::string& rel) { artifacts_.push_back(rel); }

  fs::path path(const std::string& rel) const { return root_ / rel; }

  void finish(const std::string& status) {
    sl::RunManifest m;
    m.command = command_;
    m.config = cfg_;
    m.seed = cfg_.value("seed", uint64_t{0});
    m.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    m.artifacts = artifacts_;
    m.status = status;
    sl::write_manifest(m, (root_ / (command_ + "_manifest.json")).string());
  }

 private:
  std::string command_;
  json cfg_;
  fs::path root_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> artifacts_;
};

void run_jobs(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (int i; (i = next.fetch_add(1)) < n;) fn(i);
    });
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// shared builders
// ---------------------------------------------------------------------------

struct DistBundle {
  sl::SymbolicDistribution sym;
  sl::Renderer renderer;
  sl::PointCloudDensity cloud;
  bool on_cube = false;
  sl::HypercubeDensity hyper;
};

DistBundle build_distribution(const json& cfg) {
  const json& dc = cfg.at("distribution");
  DistBundle b;
  std::string rule = dc.value("rule", "parity");
  if (rule == "parity")
    b.sym = sl::make_parity_symbolic(dc.value("length", 8));
  else if (rule == "dyck")
    b.sym = sl::make_dyck_symbolic(dc.value("half_length", 4));
  else if (rule == "sum_rule")
    b.sym = sl::make_sum_rule(dc.value("base", 10));
  else
    throw std::invalid_argument("config distribution.rule: unknown rule '" + rule + "'");
  std::string rend = dc.value("renderer", "sign");
  if (rend == "sign") {
    if (b.sym.alphabet_size != 2)
      throw std::invalid_argument("config distribution.renderer: sign renderer needs a binary alphabet");
    b.renderer = sl::sign_renderer();
  } else if (rend == "one_hot") {
    b.renderer = sl::one_hot_renderer(b.sym.alphabet_size);
  } else {
    throw std::invalid_argument("config distribution.renderer: unknown renderer '" + rend + "'");
  }
  b.cloud = sl::render(b.sym, b.renderer);
  if (rend == "sign") {
    b.hyper = sl::hypercube_from_points(b.cloud);
    b.on_cube = true;
  }
  return b;
}

sl::NoiseSchedule build_schedule(const json& cfg) {
  const json& sc = cfg.at("schedule");
  return sl::make_linear_schedule(sc.value("T", 1000), sc.value("beta_start", 1e-4),
                                  sc.value("beta_end", 0.02));
}

int pick_t(const sl::NoiseSchedule& s, const json& tc) {
  int t = tc.value("t", 0);
  if (t > 0) return t;
  return sl::find_t_by_sqrt_alpha_bar(s, tc.value("sqrt_alpha_bar", 0.5));
}

sl::InitConfig init_config_from(const json& tc, uint64_t seed) {
  sl::InitConfig ic;
  std::string v = tc.value("init", "balanced");
  if (v == "balanced")
    ic.variant = sl::InitVariant::balanced;
  else if (v == "second_layer_squared")
    ic.variant = sl::InitVariant::second_layer_squared;
  else
    throw std::invalid_argument("config train.init: unknown variant '" + v + "'");
  ic.sigma_init = tc.value("sigma_init", 1e-3);
  ic.r = tc.value("bias_scale", 1.0);
  ic.seed = seed;
  return ic;
}

sl::TrainConfig train_config_from(const json& tc, int t, uint64_t seed) {
  sl::TrainConfig c;
  c.mode = tc.value("mode", "full") == "surrogate" ? sl::LossMode::surrogate : sl::LossMode::full;
  c.expectation = tc.value("expectation", "monte_carlo") == "exact"
                      ? sl::ExpectationMode::exact
                      : sl::ExpectationMode::monte_carlo;
  c.eta = tc.value("eta", 1e-6);
  c.steps = tc.value("steps", 1000);
  c.batch = tc.value("batch", 1024);
  c.record_every = tc.value("record_every", 100);
  c.t = t;
  if (tc.contains("coords"))
    for (const auto& v : tc.at("coords")) c.coords.push_back(v.get<int>());
  c.seed = seed;
  c.eval_batch = tc.value("eval_batch", 8192);
  c.gh_nodes = tc.value("gh_nodes", 16);
  c.record_k_top = tc.value("record_k_top", false);
  c.stratified = tc.value("stratified", false);
  c.snapshot_ratio = tc.value("snapshot_ratio", 0.0);
  return c;
}

std::vector<int> region_from_json(const json& r) {
  std::vector<int> out;
  for (const auto& v : r) out.push_back(v.get<int>());
  return out;
}

std::string region_label(const std::vector<int>& r) {
  std::ostringstream os;
  for (size_t i = 0; i < r.size(); ++i) {
    if (i) os << ';';
    os << r[i];
  }
  return os.str();
}

// Precomputed per-timestep oracles backing an exact score function.
struct ExactScoreBank {
  std::vector<sl::PosteriorOracle> oracles;  // index t-1

  ExactScoreBank(const sl::PointCloudDensity& p, const sl::NoiseSchedule& s) {
    oracles.reserve(s.T());
    for (int t = 1; t <= s.T(); ++t) oracles.emplace_back(p, s.alpha_bar_at(t));
  }
  sl::ScoreFn fn() {
    return [this](const double* x, int t, double* out) { oracles[t - 1].score_target(x, out); };
  }
};

std::string pad_step(int step) {
  std::ostringstream os;
  os << std::setw(8) << std::setfill('0') << step;
  return os.str();
}

std::ostringstream csv_stream() {
  std::ostringstream os;
  os.precision(17);
  return os;
}

json report_json(const sl::GenerationReport& r) {
  return json{{"checkpoint", r.checkpoint_id},
              {"checkpoint_step", r.checkpoint_step},
              {"n_total", r.n_total},
              {"counts",
               {{"invalid", r.invalid},
                {"hallucination", r.hallucination},
                {"in_dataset", r.in_dataset},
                {"extrapolation", r.extrapolation}}},
              {"proportions",
               {{"invalid", r.frac_invalid()},
                {"hallucination", r.frac_hallucination()},
                {"in_dataset", r.frac_in_dataset()},
                {"extrapolation", r.frac_extrapolation()}}},
              {"tau", r.tau}};
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

void run_dist(const json& cfg, ArtifactSink& sink) {
  DistBundle b = build_distribution(cfg);
  b.sym.validate();
  b.cloud.validate();
  sink.write("distribution.json", sl::to_json(b.sym));
  if (b.on_cube) sink.write("hypercube.json", sl::to_json(b.hyper));
  std::cout << "rule=" << sl::rule_name(b.sym.rule) << " length=" << b.sym.length
            << " support=" << b.sym.size() << " ambient_dim=" << b.cloud.dim << "\n";
}

void run_fourier(const json& cfg, ArtifactSink& sink) {
  DistBundle b = build_distribution(cfg);
  if (!b.on_cube)
    throw std::invalid_argument("fourier: requires the sign renderer (hypercube support)");
  sink.write("fourier.csv", sl::fourier_csv(b.hyper));
  sl::Assumption1Report rep = sl::check_assumption1(b.hyper);
  json jr{{"ok", rep.ok}, {"violations", json::array()}};
  for (const auto& v : rep.violations) {
    std::vector<int> idx;
    for (int i = 0; i < b.hyper.d; ++i)
      if (v.subset >> i & 1u) idx.push_back(i);
    jr["violations"].push_back(json{{"subset", idx}, {"order", v.order}, {"coeff", v.coeff}});
  }
  sink.write("assumption1.json", jr.dump(2));
  std::cout << "fourier rows=" << sl::fourier_report(b.hyper).size()
            << " low_order_vanishes=" << (rep.ok ? "yes" : "no") << "\n";
}

struct TrainOutput {
  sl::TwoLayerScoreNet net;
  sl::TrainHistory history;
  std::vector<std::pair<int, std::string>> checkpoints;  // (step, relative path)
  int t = 0;
  bool has_snapshot = false;  // ratio-triggered copy, step in overall numbering
  int snapshot_step = -1;
  sl::TwoLayerScoreNet snapshot;
};

// Trains in segments so intermediate checkpoints land on disk; batch streams
// differ per segment (derived seeds) while the held-out eval set is shared.
TrainOutput train_pipeline(const json& cfg, const DistBundle& b, const sl::NoiseSchedule& sch,
                           ArtifactSink& sink, const std::string& prefix) {
  const json& tc = cfg.at("train");
  uint64_t master = cfg.value("seed", uint64_t{0});
  TrainOutput out;
  out.t = pick_t(sch, tc);
  out.net = sl::init_net(b.cloud.dim, tc.value("m", 256), out.t,
                         init_config_from(tc, sl::derive_seed(master, 0x1247)));
  sl::TrainConfig base = train_config_from(tc, out.t, master);
  const int total_steps = base.steps;
  int snapshots = std::max(1, tc.value("snapshots", 1));
  snapshots = std::min(snapshots, std::max(1, total_steps));

  out.history.coords = base.coords;
  if (out.history.coords.empty())
    for (int i = 0; i < b.cloud.dim; ++i) out.history.coords.push_back(i);

  // Ratio snapshots compare against the segment's own first record, so the
  // threshold is rescaled each segment to keep the overall init as baseline.
  auto first_ratio = [](const sl::TrainRecord& r) {
    return (!r.off_axis.empty() && r.off_axis[0] > 0.0) ? r.aligned[0] / r.off_axis[0] : 0.0;
  };
  double r0_overall = 0.0, r_seg_start = 0.0;

  int done = 0;
  for (int seg = 0; seg < snapshots && !out.history.aborted; ++seg) {
    int seg_steps = total_steps / snapshots + (seg < total_steps % snapshots ? 1 : 0);
    if (seg_steps == 0) continue;
    sl::TrainConfig c = base;
    c.steps = seg_steps;
    c.seed = sl::derive_seed(master, 1000 + static_cast<uint64_t>(seg));
    c.eval_seed = sl::derive_seed(master, 777);
    if (base.snapshot_ratio > 0.0 && !out.has_snapshot && (seg == 0 || r_seg_start > 0.0))
      c.snapshot_ratio =
          seg == 0 ? base.snapshot_ratio : base.snapshot_ratio * r0_overall / r_seg_start;
    else
      c.snapshot_ratio = 0.0;
    sl::TrainHistory h = sl::train(out.net, b.cloud, sch, c);
    if (!h.records.empty()) {
      if (seg == 0) r0_overall = first_ratio(h.records.front());
      r_seg_start = first_ratio(h.records.back());
    }
    if (h.has_snapshot && !out.has_snapshot) {
      out.has_snapshot = true;
      out.snapshot_step = done + h.snapshot_step;
      out.snapshot = std::move(h.snapshot);
    }
    for (auto& rec : h.records) {
      if (seg > 0 && rec.step == 0) continue;
      rec.step += done;
      out.history.records.push_back(std::move(rec));
    }
    if (h.aborted) {
      out.history.aborted = true;
      out.history.abort_step = done + h.abort_step;
      break;
    }
    done += seg_steps;
    std::string rel = prefix + "checkpoints/ckpt_" + pad_step(done) + ".json";
    sink.write(rel, sl::checkpoint_to_json(out.net));
    out.checkpoints.emplace_back(done, rel);
  }
  sink.write(prefix + "train_history.csv", sl::history_csv(out.history));
  return out;
}

void run_train(const json& cfg, ArtifactSink& sink) {
  DistBundle b = build_distribution(cfg);
  sl::NoiseSchedule sch = build_schedule(cfg);
  TrainOutput tr = train_pipeline(cfg, b, sch, sink, "");
  const json& tc = cfg.at("train");
  uint64_t master = cfg.value("seed", uint64_t{0});

  // plateau oracles per trained coordinate; levels add because the recorded
  // loss sums squared errors over trained coordinates
  int oracle_mc = tc.value("oracle_mc", 200000);
  double linear_level = 0.0, univariate_level = 0.0;
  json per_coord = json::array();
  for (int c : tr.history.coords) {
    auto lin = sl::best_linear_loss(b.cloud, sch, tr.t, c, oracle_mc,
                                    sl::derive_seed(master, 0x11000 + static_cast<uint64_t>(c)));
    auto uni = sl::best_univariate_loss(b.cloud, sch, tr.t, c, oracle_mc, 32,
                                        sl::derive_seed(master, 0x12000 + static_cast<uint64_t>(c)));
    linear_level += lin.loss;
    univariate_level += uni.loss;
    per_coord.push_back(json{{"coord", c},
                             {"linear_loss", lin.loss},
                             {"univariate_loss", uni.loss},
                             {"univariate_bins", uni.n_bins},
                             {"univariate_converged", uni.converged}});
  }
  sink.write("loss_oracles.json", json{{"per_coordinate", per_coord},
                                       {"linear_level", linear_level},
                                       {"univariate_level", univariate_level}}
                                      .dump(2));

  sl::PhaseReport phases = sl::detect_phases(tr.history, linear_level, univariate_level);
  json jp{{"t", tr.t},
          {"sqrt_alpha_bar", std::sqrt(sch.alpha_bar_at(tr.t))},
          {"aborted", tr.history.aborted},
          {"abort_step", tr.history.abort_step},
          {"linear_level", linear_level},
          {"univariate_level", univariate_level},
          {"plateaus", json::array()}};
  for (const auto& p : phases.plateaus)
    jp["plateaus"].push_back(json{{"start_step", p.start_step},
                                  {"end_step", p.end_step},
                                  {"level", p.level},
                                  {"label", p.label}});
  if (tr.has_snapshot) {
    jp["ratio_snapshot_step"] = tr.snapshot_step;
    sink.write("checkpoints/ckpt_ratio_snapshot.json", sl::checkpoint_to_json(tr.snapshot));
  }
  sink.write("phases.json", jp.dump(2));
  sink.write("checkpoint_final.json", sl::checkpoint_to_json(tr.net));
  std::cout << "trained t=" << tr.t << " steps=" << (tr.history.records.empty()
                                                        ? 0
                                                        : tr.history.records.back().step)
            << " final_loss=" << (tr.history.records.empty() ? 0.0
                                                             : tr.history.records.back().loss)
            << (tr.history.aborted ? " (aborted)" : "") << "\n";
}

void run_ldr(const json& cfg, ArtifactSink& sink, const std::vector<std::string>& ckpt_flags,
             int threads) {
  DistBundle b = build_distribution(cfg);
  sl::NoiseSchedule sch = build_schedule(cfg);
  const json& pc = cfg.at("probe");
  uint64_t master = cfg.value("seed", uint64_t{0});

  std::vector<std::string> paths = ckpt_flags;
  if (paths.empty() && pc.contains("checkpoints"))
    for (const auto& v : pc.at("checkpoints")) paths.push_back(v.get<std::string>());
  if (paths.empty())
    throw std::invalid_argument("ldr: no checkpoints given (probe.checkpoints or --checkpoint)");

  std::vector<std::vector<int>> regions;
  for (const auto& r : pc.at("regions")) regions.push_back(region_from_json(r));
  std::vector<double> targets;
  for (const auto& v : pc.at("sqrt_alpha_bar")) targets.push_back(v.get<double>());
  double eps = pc.value("eps", 1e-4);
  int n_probes = pc.value("n_probes", 4096);
  int n_points = pc.value("n_points", 64);
  int n_samples = pc.value("n_samples", 4096);

  struct Job {
    int ckpt, target, region;
  };
  std::vector<Job> jobs;
  std::vector<sl::TwoLayerScoreNet> nets;
  for (size_t ci = 0; ci < paths.size(); ++ci) {
    nets.push_back(sl::load_checkpoint(paths[ci]));
    if (nets.back().d != b.cloud.dim)
      throw std::invalid_argument("ldr: checkpoint dimension mismatch at " + paths[ci]);
    for (size_t ti = 0; ti < targets.size(); ++ti)
      for (size_t ri = 0; ri < regions.size(); ++ri)
        jobs.push_back({static_cast<int>(ci), static_cast<int>(ti), static_cast<int>(ri)});
  }

  struct Row {
    sl::LdrReport exact;
    sl::ZerothOrderReport zo;
    int t;
  };
  std::vector<Row> rows(jobs.size());
  run_jobs(static_cast<int>(jobs.size()), threads, [&](int k) {
    const Job& jb = jobs[k];
    int t = sl::find_t_by_sqrt_alpha_bar(sch, targets[jb.target]);
    sl::ForwardSampler fsamp(b.cloud, sch.alpha_bar_at(t));
    auto sampler = sl::forward_sampler_fn(fsamp);
    const auto& net = nets[jb.ckpt];
    uint64_t js = sl::derive_seed(master, 0x4c0000 + static_cast<uint64_t>(k));
    rows[k].t = t;
    rows[k].exact = sl::ldr_exact(sl::net_jacobian_fn(net), net.d, regions[jb.region], sampler,
                                  n_samples, js);
    rows[k].zo = sl::ldr_zeroth_order(sl::net_vec_fn(net), net.d, regions[jb.region], sampler, eps,
                                      n_probes, n_points, sl::derive_seed(js, 1));
  });

  auto os = csv_stream();
  os << "checkpoint,step,t,sqrt_alpha_bar,region,exact_mean,exact_se,exact_skipped,"
        "zo_mean,zo_se,zo_eps,zo_rel_change,zo_warn\n";
  auto sal = csv_stream();
  sal << "checkpoint,t,region,coord,saliency\n";
  for (size_t k = 0; k < jobs.size(); ++k) {
    const Job& jb = jobs[k];
    const Row& r = rows[k];
    os << paths[jb.ckpt] << ',' << nets[jb.ckpt].steps << ',' << r.t << ','
       << std::sqrt(sch.alpha_bar_at(r.t)) << ',' << region_label(regions[jb.region]) << ','
       << r.exact.mean << ',' << r.exact.se << ',' << r.exact.skipped << ',' << r.zo.mean << ','
       << r.zo.se << ',' << r.zo.eps << ',' << r.zo.rel_change << ',' << (r.zo.warn ? 1 : 0)
       << '\n';
    for (size_t c = 0; c < r.exact.saliency.size(); ++c)
      sal << paths[jb.ckpt] << ',' << r.t << ',' << region_label(regions[jb.region]) << ',' << c
          << ',' << r.exact.saliency[c] << '\n';
  }
  sink.write("ldr.csv", os.str());
  sink.write("saliency.csv", sal.str());
  std::cout << "ldr rows=" << jobs.size() << "\n";
}

void run_theory(const json& cfg, ArtifactSink& sink) {
  DistBundle b = build_distribution(cfg);
  const json& th = cfg.at("theory");
  auto os = csv_stream();
  os << "alpha_bar,d_star,f_max,grad_residual,k_at_d_star\n";
  std::vector<double> abs_list;
  for (const auto& v : th.at("alpha_bar")) abs_list.push_back(v.get<double>());
  for (double ab : abs_list) {
    sl::DStarResult r = sl::solve_d_star(ab);
    os << ab << ',' << r.d_star << ',' << r.f_max << ',' << r.grad_residual << ','
       << 0.5 * std::sqrt(1.0 - ab) * r.f_max << '\n';
  }
  sink.write("theory.csv", os.str());

  const json& rp = th.at("replay");
  double ab = abs_list.at(0);
  sl::TheoryCtx ctx{&b.cloud, 0, ab};
  double dstar = sl::solve_d_star(ab).d_star;
  double scale = rp.value("scale", 1e-3);
  double inv = 1.0 / std::sqrt(1.0 + dstar * dstar);
  std::vector<double> w0(b.cloud.dim, 0.0);
  w0[0] = scale * inv;
  double b0 = scale * dstar * inv;
  sl::GrowthReplayConfig gc;
  gc.horizon = rp.value("horizon", 1.0);
  gc.eta = rp.value("eta", 1e-3);
  gc.n_mc = rp.value("n_mc", 2048);
  gc.gh_nodes = rp.value("gh_nodes", 16);
  gc.record_every = rp.value("record_every", 10);
  gc.seed = sl::derive_seed(cfg.value("seed", uint64_t{0}), 0x7e0);
  sl::GrowthReplayResult gr = sl::growth_replay(ctx, scale, w0, b0, gc);
  sink.write("growth_replay.csv", sl::growth_csv(gr));
  sink.write("growth_summary.json",
             json{{"alpha_bar", ab},
                  {"d_star", dstar},
                  {"final_abs_a", gr.final_abs_a},
                  {"predicted_abs_a", gr.predicted_abs_a},
                  {"rel_deviation", gr.rel_deviation},
                  {"k_integral", gr.k_integral},
                  {"final_dir_dev", gr.final_dir_dev}}
                 .dump(2));
  std::cout << "theory rows=" << abs_list.size() << " replay_rel_dev=" << gr.rel_deviation << "\n";
}

void run_sample(const json& cfg, ArtifactSink& sink) {
  DistBundle b = build_distribution(cfg);
  sl::NoiseSchedule sch = build_schedule(cfg);
  int n = cfg.at("sample").value("n_samples", 10000);
  double tau = cfg.at("eval").value("tau", 0.5);
  uint64_t master = cfg.value("seed", uint64_t{0});

  ExactScoreBank bank(b.cloud, sch);
  std::vector<double> samples =
      sl::generate(bank.fn(), sch, b.cloud.dim, n, sl::derive_seed(master, 0x5a));
  sink.write("samples.csv", sl::samples_csv(samples, b.cloud.dim));

  sl::SymbolSet full;
  for (const auto& s : b.sym.support) full.insert(sl::encode_symbols(s));
  sl::GenerationReport rep = sl::classify_samples(samples, b.sym, full, b.renderer, tau);
  rep.checkpoint_id = "exact_score";

  // decoded-sequence histogram and total variation against the target law
  std::unordered_map<std::string, int> hist;
  int decoded = 0;
  for (int k = 0; k < n; ++k) {
    auto seq = sl::decode(samples.data() + static_cast<size_t>(k) * b.cloud.dim, b.sym.length,
                          b.renderer, tau);
    if (!seq) continue;
    ++decoded;
    ++hist[sl::encode_symbols(*seq)];
  }
  double tv = 0.0;
  for (int i = 0; i < b.sym.size(); ++i) {
    std::string key = sl::encode_symbols(b.sym.support[i]);
    auto it = hist.find(key);
    double emp = it == hist.end() ? 0.0 : static_cast<double>(it->second) / n;
    tv += std::abs(emp - b.sym.weights[i]);
    if (it != hist.end()) hist.erase(it);
  }
  for (const auto& kv : hist) tv += static_cast<double>(kv.second) / n;  // off-support mass
  tv += static_cast<double>(n - decoded) / n;                            // undecodable mass
  tv *= 0.5;

  json jr = report_json(rep);
  jr["tv_to_target"] = tv;
  sink.write("generation_report.json", jr.dump(2));
  sink.write("generation_report.csv", sl::reports_csv({rep}));
  std::cout << "exact-score generation n=" << n << " rule_satisfied="
            << rep.frac_in_dataset() + rep.frac_extrapolation() << " tv=" << tv << "\n";
}

void run_eval(const json& cfg, ArtifactSink& sink, const std::vector<std::string>& ckpt_flags,
              bool dump) {
  DistBundle b = build_distribution(cfg);
  sl::NoiseSchedule sch = build_schedule(cfg);
  const json& ec = cfg.at("eval");
  uint64_t master = cfg.value("seed", uint64_t{0});

  std::vector<std::string> paths = ckpt_flags;
  if (paths.empty() && ec.contains("checkpoints"))
    for (const auto& v : ec.at("checkpoints")) paths.push_back(v.get<std::string>());
  if (paths.empty())
    throw std::invalid_argument("eval: no checkpoints given (eval.checkpoints or --checkpoint)");

  sl::SymbolSet train = sl::split_train(b.sym, ec.value("split_fraction", 1.0),
                                        ec.value("split_seed", uint64_t{7}));
  sl::CheckpointEvalResult res =
      sl::evaluate_checkpoints(paths, b.sym, b.renderer, train, sch, ec.value("n_samples", 10000),
                               ec.value("tau", 0.5), sl::derive_seed(master, 0xe7a));
  sink.write("generation_reports.csv", sl::reports_csv(res.reports));
  if (!res.skipped.empty()) {
    std::string txt;
    for (const auto& s : res.skipped) txt += s + "\n";
    sink.write("eval_skipped.txt", txt);
  }
  if (dump) {
    json detail = json::array();
    for (const auto& r : res.reports) detail.push_back(report_json(r));
    sink.write("generation_detail.json", detail.dump(2));
  }
  std::cout << "evaluated " << res.reports.size() << " checkpoints, skipped "
            << res.skipped.size() << "\n";
}

void run_replicate(json cfg, ArtifactSink& sink, bool quick, int threads) {
  if (quick) {
    cfg["distribution"]["rule"] = "parity";
    cfg["distribution"]["length"] = 6;
    cfg["train"]["m"] = 512;
    cfg["train"]["eta"] = 1e-3;
    cfg["train"]["steps"] = 6000;
    cfg["train"]["batch"] = 256;
    cfg["train"]["record_every"] = 50;
    cfg["train"]["snapshots"] = 6;
    cfg["train"]["oracle_mc"] = 100000;
    cfg["eval"]["n_samples"] = 1000;
    cfg["sample"]["n_samples"] = 2000;
    cfg["probe"]["n_samples"] = 1024;
    cfg["probe"]["n_points"] = 32;
    cfg["probe"]["n_probes"] = 1024;
  }
  DistBundle b = build_distribution(cfg);
  sl::NoiseSchedule sch = build_schedule(cfg);
  uint64_t master = cfg.value("seed", uint64_t{0});

  // 1. distribution + spectrum artifacts
  sink.write("distribution.json", sl::to_json(b.sym));
  if (b.on_cube) {
    sink.write("fourier.csv", sl::fourier_csv(b.hyper));
    sink.write("assumption1.json",
               json{{"ok", sl::check_assumption1(b.hyper).ok}}.dump(2));
  }
  sink.write("schedule.csv", sl::schedule_csv(sch));

  // 2. training with snapshots (the stair-loss artifact)
  TrainOutput tr = train_pipeline(cfg, b, sch, sink, "");
  const json& tc = cfg.at("train");
  int oracle_mc = tc.value("oracle_mc", 200000);
  double linear_level = 0.0, univariate_level = 0.0;
  for (int c : tr.history.coords) {
    linear_level += sl::best_linear_loss(b.cloud, sch, tr.t, c, oracle_mc,
                                         sl::derive_seed(master, 0x11000 + static_cast<uint64_t>(c)))
                        .loss;
    univariate_level +=
        sl::best_univariate_loss(b.cloud, sch, tr.t, c, oracle_mc, 32,
                                 sl::derive_seed(master, 0x12000 + static_cast<uint64_t>(c)))
            .loss;
  }
  sl::PhaseReport phases = sl::detect_phases(tr.history, linear_level, univariate_level);
  json jp{{"t", tr.t},
          {"linear_level", linear_level},
          {"univariate_level", univariate_level},
          {"plateaus", json::array()}};
  for (const auto& p : phases.plateaus)
    jp["plateaus"].push_back(json{{"start_step", p.start_step},
                                  {"end_step", p.end_step},
                                  {"level", p.level},
                                  {"label", p.label}});
  sink.write("phases.json", jp.dump(2));
  sink.write("checkpoint_final.json", sl::checkpoint_to_json(tr.net));

  // 3. localization probe on the trained net at the training noise level
  const json& pc = cfg.at("probe");
  std::vector<std::vector<int>> regions;
  for (const auto& r : pc.at("regions")) regions.push_back(region_from_json(r));
  sl::ForwardSampler fsamp(b.cloud, sch.alpha_bar_at(tr.t));
  auto sampler = sl::forward_sampler_fn(fsamp);
  auto os = csv_stream();
  os << "region,exact_mean,exact_se,zo_mean,zo_se,zo_warn\n";
  std::vector<std::pair<sl::LdrReport, sl::ZerothOrderReport>> rows(regions.size());
  run_jobs(static_cast<int>(regions.size()), threads, [&](int k) {
    uint64_t js = sl::derive_seed(master, 0x4c0000 + static_cast<uint64_t>(k));
    rows[k].first = sl::ldr_exact(sl::net_jacobian_fn(tr.net), tr.net.d, regions[k], sampler,
                                  pc.value("n_samples", 4096), js);
    rows[k].second = sl::ldr_zeroth_order(sl::net_vec_fn(tr.net), tr.net.d, regions[k], sampler,
                                          pc.value("eps", 1e-4), pc.value("n_probes", 4096),
                                          pc.value("n_points", 64), sl::derive_seed(js, 1));
  });
  for (size_t k = 0; k < regions.size(); ++k)
    os << region_label(regions[k]) << ',' << rows[k].first.mean << ',' << rows[k].first.se << ','
       << rows[k].second.mean << ',' << rows[k].second.se << ',' << (rows[k].second.warn ? 1 : 0)
       << '\n';
  sink.write("ldr.csv", os.str());

  // 4. generation phase diagram over the saved checkpoints
  const json& ec = cfg.at("eval");
  sl::SymbolSet train = sl::split_train(b.sym, ec.value("split_fraction", 1.0),
                                        ec.value("split_seed", uint64_t{7}));
  std::vector<std::string> ckpt_paths;
  for (const auto& [step, rel] : tr.checkpoints) ckpt_paths.push_back(sink.path(rel).string());
  sl::CheckpointEvalResult res = sl::evaluate_checkpoints(
      ckpt_paths, b.sym, b.renderer, train, sch, ec.value("n_samples", 10000),
      ec.value("tau", 0.5), sl::derive_seed(master, 0xe7a));
  sink.write("generation_reports.csv", sl::reports_csv(res.reports));

  // 5. hallucination pipeline: localized generator vs fair-coin baseline vs
  //    exact score
  int n_hal = cfg.at("sample").value("n_samples", 10000);
  double tau = ec.value("tau", 0.5);
  sl::SymbolSet full;
  for (const auto& s : b.sym.support) full.insert(sl::encode_symbols(s));
  std::vector<sl::GenerationReport> hal;
  if (b.on_cube) {
    auto ms = sl::marginal_sign_samples(b.hyper, n_hal, sl::derive_seed(master, 0x91));
    hal.push_back(sl::classify_samples(ms, b.sym, full, b.renderer, tau));
    hal.back().checkpoint_id = "marginal_generator";
    auto us = sl::uniform_sign_samples(b.cloud.dim, n_hal, sl::derive_seed(master, 0x92));
    hal.push_back(sl::classify_samples(us, b.sym, full, b.renderer, tau));
    hal.back().checkpoint_id = "uniform_baseline";
  }
  ExactScoreBank bank(b.cloud, sch);
  auto es = sl::generate(bank.fn(), sch, b.cloud.dim, n_hal, sl::derive_seed(master, 0x93));
  hal.push_back(sl::classify_samples(es, b.sym, full, b.renderer, tau));
  hal.back().checkpoint_id = "exact_score";
  auto hcsv = csv_stream();
  hcsv << "generator,n,invalid,hallucination,in_dataset,extrapolation\n";
  for (const auto& r : hal)
    hcsv << r.checkpoint_id << ',' << r.n_total << ',' << r.invalid << ',' << r.hallucination
         << ',' << r.in_dataset << ',' << r.extrapolation << '\n';
  sink.write("hallucination.csv", hcsv.str());

  std::cout << "replicate done: t=" << tr.t << " plateaus=" << phases.plateaus.size()
            << " checkpoints=" << tr.checkpoints.size() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"score-model localization laboratory"};
  app.require_subcommand(1);

  CommonOpts c_dist, c_fourier, c_train, c_ldr, c_theory, c_sample, c_eval, c_rep;
  std::vector<std::string> ldr_ckpts, eval_ckpts;
  bool eval_dump = false, rep_quick = false;

  auto* s_dist = app.add_subcommand("dist", "Build and validate a distribution");
  add_common(s_dist, c_dist);
  auto* s_fourier = app.add_subcommand("fourier", "Spectrum and low-order coefficient report");
  add_common(s_fourier, c_fourier);
  auto* s_train = app.add_subcommand("train", "Train a score net with snapshots");
  add_common(s_train, c_train);
  auto* s_ldr = app.add_subcommand("ldr", "Localization probe on checkpoints");
  add_common(s_ldr, c_ldr);
  s_ldr->add_option("--checkpoint", ldr_ckpts, "Checkpoint file(s) to probe");
  auto* s_theory = app.add_subcommand("theory", "Growth-rate analysis and replay");
  add_common(s_theory, c_theory);
  auto* s_sample = app.add_subcommand("sample", "Generate with the exact score");
  add_common(s_sample, c_sample);
  auto* s_eval = app.add_subcommand("eval", "Classify generations from checkpoints");
  add_common(s_eval, c_eval);
  s_eval->add_option("--checkpoint", eval_ckpts, "Checkpoint file(s) to evaluate");
  s_eval->add_flag("--dump", eval_dump, "Write per-checkpoint JSON detail");
  auto* s_rep = app.add_subcommand("replicate", "Full pipeline: spectrum, training, probe, eval");
  add_common(s_rep, c_rep);
  s_rep->add_flag("--quick", rep_quick, "Reduced-size pipeline (minutes, not hours)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors exit 2; --help exits 0
  }

  auto dispatch = [&](const CommonOpts& c, const std::string& name,
                      const std::function<void(const json&, ArtifactSink&)>& fn) -> int {
    json cfg;
    try {
      cfg = effective_config(c);
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 1;
    }
    ArtifactSink sink(name, cfg, c.out_dir);
    try {
      fn(cfg, sink);
    } catch (const std::exception& e) {
      sink.finish("incomplete");
      std::cerr << name << " failed: " << e.what() << "\n";
      return 1;
    }
    sink.finish("complete");
    return 0;
  };

  if (s_dist->parsed()) return dispatch(c_dist, "dist", run_dist);
  if (s_fourier->parsed()) return dispatch(c_fourier, "fourier", run_fourier);
  if (s_train->parsed()) return dispatch(c_train, "train", run_train);
  if (s_ldr->parsed())
    return dispatch(c_ldr, "ldr", [&](const json& cfg, ArtifactSink& sink) {
      run_ldr(cfg, sink, ldr_ckpts, c_ldr.threads);
    });
  if (s_theory->parsed()) return dispatch(c_theory, "theory", run_theory);
  if (s_sample->parsed()) return dispatch(c_sample, "sample", run_sample);
  if (s_eval->parsed())
    return dispatch(c_eval, "eval", [&](const json& cfg, ArtifactSink& sink) {
      run_eval(cfg, sink, eval_ckpts, eval_dump);
    });
  if (s_rep->parsed())
    return dispatch(c_rep, "replicate", [&](const json& cfg, ArtifactSink& sink) {
      run_replicate(cfg, sink, rep_quick, c_rep.threads);
    });
  return 2;
}
