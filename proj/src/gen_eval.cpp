#include "scorelab/gen_eval.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace scorelab {

std::string gen_class_name(GenClass c) {
  switch (c) {
    case GenClass::invalid: return "invalid";
    case GenClass::hallucination: return "hallucination";
    case GenClass::in_dataset: return "in_dataset";
    case GenClass::extrapolation: return "extrapolation";
  }
  throw std::logic_error("gen_class_name: bad enum");
}

std::optional<std::vector<int>> decode(const double* x, int length, const Renderer& r, double tau) {
  std::vector<int> out(length);
  for (int s = 0; s < length; ++s) {
    const double* slot = x + static_cast<size_t>(s) * r.d_sym;
    int best = -1;
    double best_d2 = 0.0;
    for (int k = 0; k < r.alphabet_size; ++k) {
      double d2 = 0.0;
      for (int c = 0; c < r.d_sym; ++c) {
        double diff = slot[c] - r.templates[k][c];
        d2 += diff * diff;
      }
      if (best < 0 || d2 < best_d2) {
        best = k;
        best_d2 = d2;
      }
    }
    if (std::sqrt(best_d2) > tau) return std::nullopt;
    out[s] = best;
  }
  return out;
}

std::string encode_symbols(const std::vector<int>& symbols) {
  std::ostringstream os;
  for (size_t i = 0; i < symbols.size(); ++i) {
    if (i) os << ',';
    os << symbols[i];
  }
  return os.str();
}

GenClass classify(const double* x, const SymbolicDistribution& dist, const SymbolSet& train,
                  const Renderer& r, double tau) {
  auto seq = decode(x, dist.length, r, tau);
  if (!seq) return GenClass::invalid;
  if (!rule_holds(dist.rule, *seq)) return GenClass::hallucination;
  return train.count(encode_symbols(*seq)) ? GenClass::in_dataset : GenClass::extrapolation;
}

GenerationReport classify_samples(const std::vector<double>& samples, const SymbolicDistribution& dist,
                                  const SymbolSet& train, const Renderer& r, double tau) {
  const int dim = r.ambient_dim(dist.length);
  if (dim <= 0 || samples.size() % dim != 0)
    throw std::invalid_argument("classify_samples: sample buffer not a multiple of ambient dim");
  GenerationReport rep;
  rep.tau = tau;
  rep.n_total = static_cast<int>(samples.size() / dim);
  for (int k = 0; k < rep.n_total; ++k) {
    switch (classify(samples.data() + static_cast<size_t>(k) * dim, dist, train, r, tau)) {
      case GenClass::invalid: ++rep.invalid; break;
      case GenClass::hallucination: ++rep.hallucination; break;
      case GenClass::in_dataset: ++rep.in_dataset; break;
      case GenClass::extrapolation: ++rep.extrapolation; break;
    }
  }
  return rep;
}

SymbolSet split_train(const SymbolicDistribution& dist, double fraction, uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw std::invalid_argument("split_train: fraction must be in (0, 1]");
  const int n = dist.size();
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0x53504c49u));  // "SPLI"
  for (int i = n - 1; i > 0; --i) {
    int j = static_cast<int>(rng.below(static_cast<uint64_t>(i) + 1));
    std::swap(order[i], order[j]);
  }
  int keep = static_cast<int>(fraction * n);
  if (keep < 1) keep = 1;
  if (keep > n) keep = n;
  SymbolSet out;
  for (int i = 0; i < keep; ++i) out.insert(encode_symbols(dist.support[order[i]]));
  return out;
}

std::vector<double> marginal_sign_samples(const HypercubeDensity& p, int n, uint64_t seed) {
  p.validate();
  std::vector<double> p_plus(p.d, 0.0);
  for (int k = 0; k < p.size(); ++k)
    for (int i = 0; i < p.d; ++i)
      if (p.coord(k, i) > 0) p_plus[i] += p.mass[k];
  std::vector<double> out(static_cast<size_t>(n) * p.d);
  Rng rng(derive_seed(seed, 0x4d415247u));  // "MARG"
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < p.d; ++i)
      out[static_cast<size_t>(k) * p.d + i] = rng.uniform01() < p_plus[i] ? 1.0 : -1.0;
  return out;
}

std::vector<double> uniform_sign_samples(int d, int n, uint64_t seed) {
  std::vector<double> out(static_cast<size_t>(n) * d);
  Rng rng(derive_seed(seed, 0x554e4946u));  // "UNIF"
  for (auto& v : out) v = rng.sign();
  return out;
}

CheckpointEvalResult evaluate_checkpoints(const std::vector<std::string>& checkpoint_paths,
                                          const SymbolicDistribution& dist, const Renderer& r,
                                          const SymbolSet& train, const NoiseSchedule& s,
                                          int n_samples, double tau, uint64_t seed) {
  const int dim = r.ambient_dim(dist.length);
  CheckpointEvalResult out;
  for (size_t idx = 0; idx < checkpoint_paths.size(); ++idx) {
    const std::string& path = checkpoint_paths[idx];
    TwoLayerScoreNet net;
    try {
      net = load_checkpoint(path);
    } catch (const std::exception& e) {
      out.skipped.push_back(path + ": " + e.what());
      continue;
    }
    if (net.d != dim) {
      out.skipped.push_back(path + ": net dimension " + std::to_string(net.d) +
                            " does not match ambient dimension " + std::to_string(dim));
      continue;
    }
    // The checkpoint provides a time-independent score estimate; the reverse
    // chain queries it at every timestep.
    ScoreFn score = [&net](const double* x, int /*t*/, double* sc) { net.forward(x, sc); };
    std::vector<double> samples;
    try {
      samples = generate(score, s, dim, n_samples, derive_seed(seed, static_cast<uint64_t>(idx)));
    } catch (const std::exception& e) {
      out.skipped.push_back(path + ": " + e.what());
      continue;
    }
    GenerationReport rep = classify_samples(samples, dist, train, r, tau);
    rep.checkpoint_id = path;
    rep.checkpoint_step = net.steps;
    out.reports.push_back(std::move(rep));
  }
  return out;
}

std::string reports_csv(const std::vector<GenerationReport>& reports) {
  std::ostringstream os;
  os << "checkpoint_step,invalid,hallucination,in_dataset,extrapolation\n";
  for (const auto& r : reports)
    os << r.checkpoint_step << ',' << r.invalid << ',' << r.hallucination << ',' << r.in_dataset
       << ',' << r.extrapolation << '\n';
  return os.str();
}

}  // namespace scorelab
