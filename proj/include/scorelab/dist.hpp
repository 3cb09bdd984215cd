#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scorelab/rng.hpp"

namespace scorelab {

// ---------------------------------------------------------------------------
// Finite ambient-space distribution: n weighted points in R^dim.
// This is the form the diffusion machinery consumes.
// ---------------------------------------------------------------------------
struct PointCloudDensity {
  int dim = 0;
  std::vector<double> points;  // n x dim, row-major
  std::vector<double> mass;    // length n, sums to 1

  int size() const { return static_cast<int>(mass.size()); }
  const double* point(int k) const { return points.data() + static_cast<size_t>(k) * dim; }
  void validate() const;  // throws std::invalid_argument on broken invariants
};

// ---------------------------------------------------------------------------
// Distribution supported on vertices of the hypercube {+1,-1}^d, d <= 16.
// A vertex is stored as a bitmask: bit k set  <=>  coordinate k equals -1
// (mask 0 is the all-ones vertex).  Exact +-1 arithmetic via popcounts.
// ---------------------------------------------------------------------------
struct HypercubeDensity {
  int d = 0;
  std::vector<uint32_t> verts;
  std::vector<double> mass;

  int size() const { return static_cast<int>(verts.size()); }
  double coord(int k, int i) const { return (verts[k] >> i) & 1u ? -1.0 : 1.0; }
  std::vector<double> vertex(int k) const;
  PointCloudDensity ambient() const;
  void validate() const;
};

// chi_I(x) = prod_{i in I} x_i for a vertex mask; I given as a bitmask.
inline double chi(uint32_t vert, uint32_t subset) {
  return (__builtin_popcount(vert & subset) & 1) ? -1.0 : 1.0;
}

// Fourier coefficient of the probability function on the cube:
//   coeff(I) = E_{x ~ Unif({+-1}^d)}[ p0(x) * chi_I(x) ]
//            = 2^-d * sum_{x in support} mass(x) * chi_I(x),
// where p0(x) is the point mass of x.  coeff(empty) = 2^-d always.
double fourier_coeff(const HypercubeDensity& p, uint32_t subset);

struct FourierRow {
  uint32_t subset;
  int order;
  double coeff;
};

// Rows for the empty subset plus every order-1 and order-2 subset (the
// low-order coefficients whose vanishing certifies near-uniformity).  For
// d = 8 that is 1 + 8 + 28 = 37 rows.
std::vector<FourierRow> fourier_report(const HypercubeDensity& p);

struct Assumption1Report {
  bool ok = true;
  std::vector<FourierRow> violations;  // order-1/2 subsets with |coeff| > tol
};

// Checks that all order-1 and order-2 coefficients vanish (pairwise
// independence of coordinates plus unbiased marginals).
Assumption1Report check_assumption1(const HypercubeDensity& p, double tol = 1e-12);

// Marginal onto the listed coordinates (0-based, strictly increasing).
HypercubeDensity marginal(const HypercubeDensity& p, const std::vector<int>& coords);

// Categorical sampler over the support with a precomputed CDF.
class CategoricalSampler {
 public:
  explicit CategoricalSampler(const std::vector<double>& mass);
  int draw(Rng& rng) const;

 private:
  std::vector<double> cdf_;
};

// Draws a support vertex index.
int sample_x0(const HypercubeDensity& p, Rng& rng);

// ---------------------------------------------------------------------------
// Symbolic layer: length-L strings over an alphabet of K symbols, a rule
// deciding validity, and a renderer mapping symbol strings to R^(L*d_sym).
// ---------------------------------------------------------------------------
enum class Rule { parity, dyck, sum_rule };

std::string rule_name(Rule r);
Rule rule_from_name(const std::string& name);

// rule semantics on symbol indices:
//   parity:   K=2, index 0 -> +1, 1 -> -1; product of values is +1
//   dyck:     K=2, index 0 -> open(+1), 1 -> close(-1); prefix sums >= 0, total 0
//   sum_rule: L=4, s0 + s1 == s2 + s3
bool rule_holds(Rule rule, const std::vector<int>& symbols);

struct SymbolicDistribution {
  int alphabet_size = 0;
  int length = 0;
  Rule rule = Rule::parity;
  std::vector<std::vector<int>> support;
  std::vector<double> weights;

  int size() const { return static_cast<int>(support.size()); }
  void validate() const;
};

struct Renderer {
  int alphabet_size = 0;
  int d_sym = 0;                             // ambient dims per symbol
  std::vector<std::vector<double>> templates;  // one per symbol index

  int ambient_dim(int length) const { return d_sym * length; }
  void render(const std::vector<int>& symbols, double* out) const;
  void validate() const;
};

// Scalar +-1 renderer: symbol 0 -> +1, symbol 1 -> -1.  Template order puts
// +1 first so that the tie at a rendered value of exactly 0 decodes as +1.
Renderer sign_renderer();

// One-hot renderer for a K-symbol alphabet (canonical basis vectors).
Renderer one_hot_renderer(int alphabet_size);

PointCloudDensity render(const SymbolicDistribution& dist, const Renderer& r);

// Factories ----------------------------------------------------------------
// Uniform over even-parity strings; 2^(d-1) support points.
SymbolicDistribution make_parity_symbolic(int d);
HypercubeDensity make_parity(int d);

// Uniform over balanced-parenthesis strings of half-length h (Catalan(h)
// support points); rendered on the hypercube of dimension 2h.
SymbolicDistribution make_dyck_symbolic(int half_length);
HypercubeDensity make_dyck(int half_length);

// Uniform over 4-digit strings with s0 + s1 == s2 + s3, digits in [0, base).
SymbolicDistribution make_sum_rule(int base);

// Hypercube density from rendered +-1 points (entries must be exactly +-1).
HypercubeDensity hypercube_from_points(const PointCloudDensity& pc);

// JSON (de)serialization round-trips the full structure.
std::string to_json(const HypercubeDensity& p);
std::string to_json(const SymbolicDistribution& p);
HypercubeDensity hypercube_from_json(const std::string& text);
SymbolicDistribution symbolic_from_json(const std::string& text);

// CSV: "subset,order,coeff" rows from fourier_report; subset as
// semicolon-joined 0-based indices ("" for empty).
std::string fourier_csv(const HypercubeDensity& p);

}  // namespace scorelab
