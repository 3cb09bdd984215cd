#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "scorelab/diffusion.hpp"
#include "scorelab/dist.hpp"
#include "scorelab/score_net.hpp"

namespace scorelab {

enum class GenClass { invalid, hallucination, in_dataset, extrapolation };

std::string gen_class_name(GenClass c);

// Nearest-template decoding per symbol slot; none when any slot's distance
// exceeds tau (ties resolve to the lowest template index, so a +-1 renderer
// decodes an exact 0 as +1).
std::optional<std::vector<int>> decode(const double* x, int length, const Renderer& r, double tau);

// Symbol sequences as hashable keys.
std::string encode_symbols(const std::vector<int>& symbols);
using SymbolSet = std::unordered_set<std::string>;

// Invalid if decoding fails; else Hallucination if the rule rejects; else
// InDataset / Extrapolation by membership in the training split.
GenClass classify(const double* x, const SymbolicDistribution& dist, const SymbolSet& train,
                  const Renderer& r, double tau);

struct GenerationReport {
  std::string checkpoint_id;
  int checkpoint_step = -1;
  int n_total = 0;
  int invalid = 0, hallucination = 0, in_dataset = 0, extrapolation = 0;
  double tau = 0.0;
  double frac_invalid() const { return n_total ? static_cast<double>(invalid) / n_total : 0.0; }
  double frac_hallucination() const {
    return n_total ? static_cast<double>(hallucination) / n_total : 0.0;
  }
  double frac_in_dataset() const {
    return n_total ? static_cast<double>(in_dataset) / n_total : 0.0;
  }
  double frac_extrapolation() const {
    return n_total ? static_cast<double>(extrapolation) / n_total : 0.0;
  }
};

GenerationReport classify_samples(const std::vector<double>& samples, const SymbolicDistribution& dist,
                                  const SymbolSet& train, const Renderer& r, double tau);

// Uniform-random training split: shuffles the support and keeps
// floor(fraction * support size) sequences (at least one).
SymbolSet split_train(const SymbolicDistribution& dist, double fraction, uint64_t seed);

// Per-coordinate independent sign sampler matching the marginals of p: the
// generator a localization-restricted model realizes (coordinates carry no
// joint information).  Returns n x d ambient samples.
std::vector<double> marginal_sign_samples(const HypercubeDensity& p, int n, uint64_t seed);

// Fair-coin baseline on the hypercube.
std::vector<double> uniform_sign_samples(int d, int n, uint64_t seed);

// One report per checkpoint file: loads the net, generates n_samples through
// the reverse process (the net supplies a time-independent score), and
// classifies.  Unloadable checkpoints are skipped with a diagnostic line in
// `skipped`.
struct CheckpointEvalResult {
  std::vector<GenerationReport> reports;
  std::vector<std::string> skipped;
};

CheckpointEvalResult evaluate_checkpoints(const std::vector<std::string>& checkpoint_paths,
                                          const SymbolicDistribution& dist, const Renderer& r,
                                          const SymbolSet& train, const NoiseSchedule& s,
                                          int n_samples, double tau, uint64_t seed);

std::string reports_csv(const std::vector<GenerationReport>& reports);

}  // namespace scorelab
