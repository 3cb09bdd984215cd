#include "scorelab/dist.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace scorelab {

namespace {
constexpr double kMassTol = 1e-12;

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}
}  // namespace

// --- PointCloudDensity ------------------------------------------------------

void PointCloudDensity::validate() const {
  require(dim > 0, "point cloud: dim must be positive");
  require(!mass.empty(), "point cloud: empty support");
  require(points.size() == mass.size() * static_cast<size_t>(dim),
          "point cloud: points/mass size mismatch");
  double total = 0.0;
  for (double w : mass) {
    require(w > 0.0, "point cloud: masses must be positive");
    total += w;
  }
  require(std::abs(total - 1.0) <= kMassTol, "point cloud: masses must sum to 1");
  for (double v : points) require(std::isfinite(v), "point cloud: non-finite point");
}

// --- HypercubeDensity -------------------------------------------------------

std::vector<double> HypercubeDensity::vertex(int k) const {
  std::vector<double> x(d);
  for (int i = 0; i < d; ++i) x[i] = coord(k, i);
  return x;
}

PointCloudDensity HypercubeDensity::ambient() const {
  PointCloudDensity pc;
  pc.dim = d;
  pc.mass = mass;
  pc.points.resize(static_cast<size_t>(size()) * d);
  for (int k = 0; k < size(); ++k)
    for (int i = 0; i < d; ++i) pc.points[static_cast<size_t>(k) * d + i] = coord(k, i);
  return pc;
}

void HypercubeDensity::validate() const {
  require(d >= 1 && d <= 16, "hypercube: d must be in [1,16]");
  require(!verts.empty(), "hypercube: empty support");
  require(verts.size() == mass.size(), "hypercube: verts/mass size mismatch");
  double total = 0.0;
  uint32_t limit = (1u << d) - 1u;
  std::vector<uint32_t> sorted = verts;
  std::sort(sorted.begin(), sorted.end());
  require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
          "hypercube: duplicate vertex");
  for (size_t k = 0; k < verts.size(); ++k) {
    require((verts[k] & ~limit) == 0, "hypercube: vertex mask out of range");
    require(mass[k] > 0.0, "hypercube: masses must be positive");
    total += mass[k];
  }
  require(std::abs(total - 1.0) <= kMassTol, "hypercube: masses must sum to 1");
}

// --- Fourier ----------------------------------------------------------------

double fourier_coeff(const HypercubeDensity& p, uint32_t subset) {
  require((subset >> p.d) == 0, "fourier_coeff: subset mask out of range");
  double acc = 0.0;
  for (int k = 0; k < p.size(); ++k) acc += p.mass[k] * chi(p.verts[k], subset);
  return std::ldexp(acc, -p.d);  // 2^-d * sum
}

std::vector<FourierRow> fourier_report(const HypercubeDensity& p) {
  std::vector<FourierRow> rows;
  rows.push_back({0u, 0, fourier_coeff(p, 0u)});
  for (int i = 0; i < p.d; ++i)
    rows.push_back({1u << i, 1, fourier_coeff(p, 1u << i)});
  for (int i = 0; i < p.d; ++i)
    for (int j = i + 1; j < p.d; ++j) {
      uint32_t s = (1u << i) | (1u << j);
      rows.push_back({s, 2, fourier_coeff(p, s)});
    }
  return rows;
}

Assumption1Report check_assumption1(const HypercubeDensity& p, double tol) {
  Assumption1Report rep;
  for (const FourierRow& row : fourier_report(p)) {
    if (row.order < 1 || row.order > 2) continue;  // order 0 is 2^-d by normalization
    if (std::abs(row.coeff) > tol) {
      rep.ok = false;
      rep.violations.push_back(row);
    }
  }
  return rep;
}

HypercubeDensity marginal(const HypercubeDensity& p, const std::vector<int>& coords) {
  require(!coords.empty(), "marginal: empty coordinate list");
  for (size_t i = 0; i < coords.size(); ++i) {
    require(coords[i] >= 0 && coords[i] < p.d, "marginal: coordinate out of range");
    if (i) require(coords[i] > coords[i - 1], "marginal: coordinates must be strictly increasing");
  }
  std::unordered_map<uint32_t, double> acc;
  for (int k = 0; k < p.size(); ++k) {
    uint32_t proj = 0;
    for (size_t i = 0; i < coords.size(); ++i)
      if ((p.verts[k] >> coords[i]) & 1u) proj |= 1u << i;
    acc[proj] += p.mass[k];
  }
  HypercubeDensity out;
  out.d = static_cast<int>(coords.size());
  std::vector<uint32_t> keys;
  for (const auto& kv : acc) keys.push_back(kv.first);
  std::sort(keys.begin(), keys.end());
  for (uint32_t key : keys) {
    out.verts.push_back(key);
    out.mass.push_back(acc[key]);
  }
  return out;
}

// --- Sampling ---------------------------------------------------------------

CategoricalSampler::CategoricalSampler(const std::vector<double>& mass) {
  require(!mass.empty(), "categorical: empty mass vector");
  cdf_.resize(mass.size());
  double acc = 0.0;
  for (size_t i = 0; i < mass.size(); ++i) {
    require(mass[i] >= 0.0, "categorical: negative mass");
    acc += mass[i];
    cdf_[i] = acc;
  }
  require(std::abs(acc - 1.0) <= 1e-9, "categorical: masses must sum to 1");
  cdf_.back() = 1.0;  // guard against round-off at the top
}

int CategoricalSampler::draw(Rng& rng) const {
  double u = rng.uniform01();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return static_cast<int>(it - cdf_.begin());
}

int sample_x0(const HypercubeDensity& p, Rng& rng) {
  CategoricalSampler s(p.mass);
  return s.draw(rng);
}

// --- Rules ------------------------------------------------------------------

std::string rule_name(Rule r) {
  switch (r) {
    case Rule::parity: return "parity";
    case Rule::dyck: return "dyck";
    case Rule::sum_rule: return "sum_rule";
  }
  throw std::logic_error("unreachable rule");
}

Rule rule_from_name(const std::string& name) {
  if (name == "parity") return Rule::parity;
  if (name == "dyck") return Rule::dyck;
  if (name == "sum_rule") return Rule::sum_rule;
  throw std::invalid_argument("unknown rule: " + name);
}

bool rule_holds(Rule rule, const std::vector<int>& symbols) {
  switch (rule) {
    case Rule::parity: {
      int minus = 0;
      for (int s : symbols) {
        if (s != 0 && s != 1) return false;
        minus += s;
      }
      return (minus & 1) == 0;
    }
    case Rule::dyck: {
      int depth = 0;
      for (int s : symbols) {
        if (s != 0 && s != 1) return false;
        depth += (s == 0) ? 1 : -1;
        if (depth < 0) return false;
      }
      return depth == 0;
    }
    case Rule::sum_rule: {
      if (symbols.size() != 4) return false;
      for (int s : symbols)
        if (s < 0) return false;
      return symbols[0] + symbols[1] == symbols[2] + symbols[3];
    }
  }
  throw std::logic_error("unreachable rule");
}

// --- SymbolicDistribution / Renderer ---------------------------------------

void SymbolicDistribution::validate() const {
  require(alphabet_size >= 2, "symbolic: alphabet_size must be >= 2");
  require(length >= 1, "symbolic: length must be >= 1");
  require(!support.empty(), "symbolic: empty support");
  require(support.size() == weights.size(), "symbolic: support/weights size mismatch");
  double total = 0.0;
  for (size_t k = 0; k < support.size(); ++k) {
    require(static_cast<int>(support[k].size()) == length, "symbolic: wrong string length");
    for (int s : support[k])
      require(s >= 0 && s < alphabet_size, "symbolic: symbol index out of range");
    require(rule_holds(rule, support[k]), "symbolic: support string violates the rule");
    require(weights[k] > 0.0, "symbolic: weights must be positive");
    total += weights[k];
  }
  require(std::abs(total - 1.0) <= kMassTol, "symbolic: weights must sum to 1");
}

void Renderer::validate() const {
  require(alphabet_size >= 2, "renderer: alphabet_size must be >= 2");
  require(d_sym >= 1, "renderer: d_sym must be >= 1");
  require(static_cast<int>(templates.size()) == alphabet_size,
          "renderer: one template per symbol required");
  for (const auto& t : templates)
    require(static_cast<int>(t.size()) == d_sym, "renderer: template dim mismatch");
}

void Renderer::render(const std::vector<int>& symbols, double* out) const {
  for (size_t pos = 0; pos < symbols.size(); ++pos) {
    const std::vector<double>& t = templates[symbols[pos]];
    for (int i = 0; i < d_sym; ++i) out[pos * d_sym + i] = t[i];
  }
}

Renderer sign_renderer() {
  Renderer r;
  r.alphabet_size = 2;
  r.d_sym = 1;
  r.templates = {{1.0}, {-1.0}};
  return r;
}

Renderer one_hot_renderer(int alphabet_size) {
  require(alphabet_size >= 2, "one_hot_renderer: alphabet_size must be >= 2");
  Renderer r;
  r.alphabet_size = alphabet_size;
  r.d_sym = alphabet_size;
  r.templates.assign(alphabet_size, std::vector<double>(alphabet_size, 0.0));
  for (int s = 0; s < alphabet_size; ++s) r.templates[s][s] = 1.0;
  return r;
}

PointCloudDensity render(const SymbolicDistribution& dist, const Renderer& r) {
  dist.validate();
  r.validate();
  require(dist.alphabet_size == r.alphabet_size, "render: alphabet size mismatch");
  PointCloudDensity pc;
  pc.dim = r.ambient_dim(dist.length);
  pc.mass = dist.weights;
  pc.points.resize(static_cast<size_t>(dist.size()) * pc.dim);
  for (int k = 0; k < dist.size(); ++k)
    r.render(dist.support[k], pc.points.data() + static_cast<size_t>(k) * pc.dim);
  return pc;
}

// --- Factories --------------------------------------------------------------

SymbolicDistribution make_parity_symbolic(int d) {
  require(d >= 2 && d <= 16, "parity: d must be in [2,16]");
  SymbolicDistribution dist;
  dist.alphabet_size = 2;
  dist.length = d;
  dist.rule = Rule::parity;
  for (uint32_t v = 0; v < (1u << d); ++v) {
    if (__builtin_popcount(v) & 1) continue;  // odd number of -1 symbols
    std::vector<int> s(d);
    for (int i = 0; i < d; ++i) s[i] = (v >> i) & 1u;
    dist.support.push_back(std::move(s));
  }
  dist.weights.assign(dist.support.size(), 1.0 / static_cast<double>(dist.support.size()));
  return dist;
}

HypercubeDensity make_parity(int d) {
  SymbolicDistribution sym = make_parity_symbolic(d);
  HypercubeDensity p = hypercube_from_points(render(sym, sign_renderer()));
  p.validate();
  return p;
}

namespace {
void dyck_rec(int open_left, int depth, std::vector<int>& prefix,
              std::vector<std::vector<int>>& out) {
  if (open_left == 0 && depth == 0) {
    out.push_back(prefix);
    return;
  }
  if (open_left > 0) {
    prefix.push_back(0);
    dyck_rec(open_left - 1, depth + 1, prefix, out);
    prefix.pop_back();
  }
  if (depth > 0) {
    prefix.push_back(1);
    dyck_rec(open_left, depth - 1, prefix, out);
    prefix.pop_back();
  }
}
}  // namespace

SymbolicDistribution make_dyck_symbolic(int half_length) {
  require(half_length >= 1 && half_length <= 8, "dyck: half_length must be in [1,8]");
  SymbolicDistribution dist;
  dist.alphabet_size = 2;
  dist.length = 2 * half_length;
  dist.rule = Rule::dyck;
  std::vector<int> prefix;
  dyck_rec(half_length, 0, prefix, dist.support);
  dist.weights.assign(dist.support.size(), 1.0 / static_cast<double>(dist.support.size()));
  return dist;
}

HypercubeDensity make_dyck(int half_length) {
  SymbolicDistribution sym = make_dyck_symbolic(half_length);
  HypercubeDensity p = hypercube_from_points(render(sym, sign_renderer()));
  p.validate();
  return p;
}

SymbolicDistribution make_sum_rule(int base) {
  require(base >= 2 && base <= 16, "sum_rule: base must be in [2,16]");
  SymbolicDistribution dist;
  dist.alphabet_size = base;
  dist.length = 4;
  dist.rule = Rule::sum_rule;
  for (int a = 0; a < base; ++a)
    for (int b = 0; b < base; ++b)
      for (int c = 0; c < base; ++c)
        for (int e = 0; e < base; ++e)
          if (a + b == c + e) dist.support.push_back({a, b, c, e});
  dist.weights.assign(dist.support.size(), 1.0 / static_cast<double>(dist.support.size()));
  return dist;
}

HypercubeDensity hypercube_from_points(const PointCloudDensity& pc) {
  pc.validate();
  require(pc.dim <= 16, "hypercube_from_points: dim must be <= 16");
  HypercubeDensity p;
  p.d = pc.dim;
  p.mass = pc.mass;
  for (int k = 0; k < pc.size(); ++k) {
    uint32_t v = 0;
    for (int i = 0; i < pc.dim; ++i) {
      double x = pc.point(k)[i];
      require(x == 1.0 || x == -1.0, "hypercube_from_points: entries must be exactly +-1");
      if (x == -1.0) v |= 1u << i;
    }
    p.verts.push_back(v);
  }
  p.validate();
  return p;
}

// --- JSON / CSV -------------------------------------------------------------

std::string to_json(const HypercubeDensity& p) {
  nlohmann::json j;
  j["kind"] = "hypercube";
  j["d"] = p.d;
  j["verts"] = p.verts;
  j["mass"] = p.mass;
  return j.dump(2);
}

std::string to_json(const SymbolicDistribution& p) {
  nlohmann::json j;
  j["kind"] = "symbolic";
  j["alphabet_size"] = p.alphabet_size;
  j["length"] = p.length;
  j["rule"] = rule_name(p.rule);
  j["support"] = p.support;
  j["weights"] = p.weights;
  return j.dump(2);
}

HypercubeDensity hypercube_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  require(j.at("kind") == "hypercube", "hypercube_from_json: wrong kind");
  HypercubeDensity p;
  p.d = j.at("d").get<int>();
  p.verts = j.at("verts").get<std::vector<uint32_t>>();
  p.mass = j.at("mass").get<std::vector<double>>();
  p.validate();
  return p;
}

SymbolicDistribution symbolic_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  require(j.at("kind") == "symbolic", "symbolic_from_json: wrong kind");
  SymbolicDistribution p;
  p.alphabet_size = j.at("alphabet_size").get<int>();
  p.length = j.at("length").get<int>();
  p.rule = rule_from_name(j.at("rule").get<std::string>());
  p.support = j.at("support").get<std::vector<std::vector<int>>>();
  p.weights = j.at("weights").get<std::vector<double>>();
  p.validate();
  return p;
}

std::string fourier_csv(const HypercubeDensity& p) {
  std::ostringstream os;
  os << "subset,order,coeff\n";
  os.precision(17);
  for (const FourierRow& row : fourier_report(p)) {
    bool first = true;
    for (int i = 0; i < p.d; ++i) {
      if ((row.subset >> i) & 1u) {
        if (!first) os << ';';
        os << i;
        first = false;
      }
    }
    os << ',' << row.order << ',' << row.coeff << '\n';
  }
  return os.str();
}

}  // namespace scorelab
