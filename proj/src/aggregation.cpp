#include "emf/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace emf::agg {

namespace {

constexpr double kInputSlack = 1e-9;
constexpr int kStackCap = 64;

// Stack storage for the desk-scale arities the fusion engine uses; spills to
// the heap only for unusually long inputs.
struct Scratch {
  std::array<double, kStackCap> stack;
  std::vector<double> heap;

  double* acquire(int n) {
    if (n <= kStackCap) return stack.data();
    heap.resize(static_cast<std::size_t>(n));
    return heap.data();
  }
};

void load_unit_values(VectorRef x, double* out) {
  const int n = static_cast<int>(x.size());
  for (int i = 0; i < n; ++i) {
    const double v = x[i];
    if (!std::isfinite(v) || v < -kInputSlack || v > 1.0 + kInputSlack) {
      raise(ErrorCode::InvalidValue,
            "aggregation input must lie in [0, 1]; got " + std::to_string(v));
    }
    out[i] = std::clamp(v, 0.0, 1.0);
  }
}

void sort_values(double* v, int n) {
  if (n <= 32) {
    for (int i = 1; i < n; ++i) {
      const double key = v[i];
      int j = i - 1;
      while (j >= 0 && v[j] > key) {
        v[j + 1] = v[j];
        --j;
      }
      v[j + 1] = key;
    }
  } else {
    std::sort(v, v + n);
  }
}

double clamp_unit(double v) { return std::clamp(v, 0.0, 1.0); }

double binary_fusion(BinaryFusion f, double x, double y) {
  switch (f) {
    case BinaryFusion::Product:
      return x * y;
    case BinaryFusion::Minimum:
      return std::min(x, y);
    case BinaryFusion::Hamacher:
      return hamacher_tnorm(x, y);
  }
  return 0.0;
}

// All integral kernels run on ascending values v[0..n-1] with
// tail[i] = m({i+1, ..., n}); the convention x_sigma(0) = 0 supplies the
// first increment.

double k_choquet(const double* v, const double* tail, int n) {
  double acc = 0.0;
  double prev = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += (v[i] - prev) * tail[i];
    prev = v[i];
  }
  return acc;
}

double k_cf_hamacher(const double* v, const double* tail, int n) {
  double acc = 0.0;
  double prev = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += hamacher_tnorm(v[i] - prev, tail[i]);
    prev = v[i];
  }
  return clamp_unit(acc);
}

double k_cf1f2(const double* v, const double* tail, int n, BinaryFusion f1,
               BinaryFusion f2) {
  double acc = 0.0;
  double prev = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += binary_fusion(f1, v[i], tail[i]) - binary_fusion(f2, prev, tail[i]);
    prev = v[i];
  }
  return clamp_unit(acc);
}

double k_sugeno(const double* v, const double* tail, int n) {
  double best = 0.0;
  for (int i = 0; i < n; ++i) best = std::max(best, std::min(v[i], tail[i]));
  return best;
}

double k_sugeno_hamacher(const double* v, const double* tail, int n) {
  double best = 0.0;
  for (int i = 0; i < n; ++i) best = std::max(best, hamacher_tnorm(v[i], tail[i]));
  return best;
}

double k_sugeno_f(const double* v, const double* tail, int n) {
  double best = 0.0;
  for (int i = 0; i < n; ++i) best = std::max(best, v[i] * tail[i]);
  return best;
}

double quantifier(double t, double a, double b) {
  if (t < a) return 0.0;
  if (t > b) return 1.0;
  return (t - a) / (b - a);
}

void fill_owa_weights(double a, double b, int n, double* w) {
  double prev_q = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double q = quantifier(static_cast<double>(i) / n, a, b);
    w[i - 1] = q - prev_q;
    prev_q = q;
  }
}

// Ascending values dotted with the weights in descending-rank order.
double k_owa(const double* v_asc, const double* w, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += w[i] * v_asc[n - 1 - i];
  return acc;
}

double k_mean(const double* v, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += v[i];
  return acc / n;
}

double k_median_sorted(const double* v, int n) {
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double k_geometric_mean(const double* v, int n) {
  double log_acc = 0.0;
  for (int i = 0; i < n; ++i) {
    if (v[i] == 0.0) return 0.0;
    log_acc += std::log(v[i]);
  }
  return std::exp(log_acc / n);
}

double k_sinus_overlap(const double* v, int n) {
  double prod = 1.0;
  for (int i = 0; i < n; ++i) prod *= v[i];
  return std::sin(M_PI / 2.0 * prod);
}

double k_harmonic_mean(const double* v, int n) {
  double inv_acc = 0.0;
  for (int i = 0; i < n; ++i) {
    if (v[i] == 0.0) return 0.0;  // continuous limit
    inv_acc += 1.0 / v[i];
  }
  return n / inv_acc;
}

void require_arity_match(VectorRef x, const FuzzyMeasure& m) {
  if (static_cast<int>(x.size()) != m.n()) {
    raise(ErrorCode::ArityMismatch,
          "input arity " + std::to_string(x.size()) +
              " does not match measure arity " + std::to_string(m.n()));
  }
  if (x.size() == 0) raise(ErrorCode::InvalidArity, "empty aggregation input");
}

// Shared preparation for the measure-based reference entry points.
struct Prepared {
  Scratch values_scratch;
  Scratch tails_scratch;
  double* v = nullptr;
  double* tail = nullptr;
  int n = 0;
};

void prepare(VectorRef x, const FuzzyMeasure& m, Prepared& p) {
  require_arity_match(x, m);
  p.n = static_cast<int>(x.size());
  p.v = p.values_scratch.acquire(p.n);
  p.tail = p.tails_scratch.acquire(p.n);
  load_unit_values(x, p.v);
  sort_values(p.v, p.n);
  for (int i = 1; i <= p.n; ++i) p.tail[i - 1] = m.tail(i);
}

}  // namespace

FuzzyMeasure cardinal_measure(int n) {
  if (n < 1) raise(ErrorCode::InvalidArity, "fuzzy measure needs n >= 1");
  FuzzyMeasure m;
  m.by_cardinality.resize(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) {
    m.by_cardinality[k] = static_cast<double>(k) / static_cast<double>(n);
  }
  return m;
}

FuzzyMeasure make_measure(std::vector<double> by_cardinality) {
  if (by_cardinality.size() < 2) {
    raise(ErrorCode::InvalidArity, "fuzzy measure needs n >= 1");
  }
  if (by_cardinality.front() != 0.0 || by_cardinality.back() != 1.0) {
    raise(ErrorCode::InvalidValue, "fuzzy measure must satisfy m(0)=0, m(n)=1");
  }
  for (std::size_t k = 1; k < by_cardinality.size(); ++k) {
    if (!(by_cardinality[k] >= by_cardinality[k - 1])) {
      raise(ErrorCode::InvalidValue, "fuzzy measure must be nondecreasing");
    }
  }
  return FuzzyMeasure{std::move(by_cardinality)};
}

SortedInput sort_ascending(VectorRef x, const FuzzyMeasure& m) {
  require_arity_match(x, m);
  const int n = static_cast<int>(x.size());
  SortedInput s;
  s.perm.resize(static_cast<std::size_t>(n));
  std::iota(s.perm.begin(), s.perm.end(), 0);
  std::stable_sort(s.perm.begin(), s.perm.end(),
                   [&](int i, int j) { return x[i] < x[j]; });
  s.sorted.resize(n);
  s.tail_measures.resize(n);
  for (int i = 0; i < n; ++i) {
    s.sorted[i] = x[s.perm[i]];
    s.tail_measures[i] = m.tail(i + 1);
  }
  return s;
}

double hamacher_tnorm(double x, double y) {
  if (x == 0.0 && y == 0.0) return 0.0;
  return x * y / (x + y - x * y);
}

double choquet(VectorRef x, const FuzzyMeasure& m) {
  Prepared p;
  prepare(x, m, p);
  return k_choquet(p.v, p.tail, p.n);
}

double cf_hamacher(VectorRef x, const FuzzyMeasure& m) {
  Prepared p;
  prepare(x, m, p);
  return k_cf_hamacher(p.v, p.tail, p.n);
}

double cf1f2(VectorRef x, const FuzzyMeasure& m, BinaryFusion f1,
             BinaryFusion f2) {
  Prepared p;
  prepare(x, m, p);
  return k_cf1f2(p.v, p.tail, p.n, f1, f2);
}

double sugeno(VectorRef x, const FuzzyMeasure& m) {
  Prepared p;
  prepare(x, m, p);
  return k_sugeno(p.v, p.tail, p.n);
}

double sugeno_hamacher(VectorRef x, const FuzzyMeasure& m) {
  Prepared p;
  prepare(x, m, p);
  return k_sugeno_hamacher(p.v, p.tail, p.n);
}

double sugeno_f(VectorRef x, const FuzzyMeasure& m) {
  Prepared p;
  prepare(x, m, p);
  return k_sugeno_f(p.v, p.tail, p.n);
}

OwaWeights owa_weights(double a, double b, int n) {
  if (n < 1) raise(ErrorCode::InvalidArity, "OWA needs n >= 1");
  if (!(a >= 0.0 && a < b && b <= 1.0)) {
    raise(ErrorCode::InvalidQuantifier,
          "quantifier needs 0 <= a < b <= 1; got a=" + std::to_string(a) +
              " b=" + std::to_string(b));
  }
  OwaWeights w;
  w.a = a;
  w.b = b;
  w.weights.resize(n);
  fill_owa_weights(a, b, n, w.weights.data());
  return w;
}

double owa(VectorRef x, const OwaWeights& w) {
  if (x.size() != w.weights.size()) {
    raise(ErrorCode::ArityMismatch,
          "input arity " + std::to_string(x.size()) +
              " does not match weight count " + std::to_string(w.weights.size()));
  }
  if (x.size() == 0) raise(ErrorCode::InvalidArity, "empty aggregation input");
  const int n = static_cast<int>(x.size());
  Scratch scratch;
  double* v = scratch.acquire(n);
  load_unit_values(x, v);
  sort_values(v, n);
  return k_owa(v, w.weights.data(), n);
}

double overlap(VectorRef x, OverlapKind kind) {
  if (x.size() == 0) raise(ErrorCode::InvalidArity, "empty aggregation input");
  const int n = static_cast<int>(x.size());
  Scratch scratch;
  double* v = scratch.acquire(n);
  load_unit_values(x, v);
  sort_values(v, n);
  switch (kind) {
    case OverlapKind::HarmonicMean:
      return k_harmonic_mean(v, n);
    case OverlapKind::SinusOverlap:
      return k_sinus_overlap(v, n);
    case OverlapKind::GeometricMean:
      return k_geometric_mean(v, n);
    case OverlapKind::Minimum:
      return v[0];
  }
  return 0.0;
}

double classical(VectorRef x, ClassicalKind kind) {
  if (x.size() == 0) raise(ErrorCode::InvalidArity, "empty aggregation input");
  const int n = static_cast<int>(x.size());
  Scratch scratch;
  double* v = scratch.acquire(n);
  load_unit_values(x, v);
  sort_values(v, n);
  switch (kind) {
    case ClassicalKind::Mean:
      return k_mean(v, n);
    case ClassicalKind::Median:
      return k_median_sorted(v, n);
    case ClassicalKind::Min:
      return v[0];
    case ClassicalKind::Max:
      return v[n - 1];
  }
  return 0.0;
}

const std::array<AggregatorId, kAggregatorCount>& aggregator_catalog() {
  static const std::array<AggregatorId, kAggregatorCount> catalog = {
      AggregatorId::Mean,    AggregatorId::Median, AggregatorId::Choquet,
      AggregatorId::CfMm,    AggregatorId::Sugeno, AggregatorId::HSugeno,
      AggregatorId::FSugeno, AggregatorId::Min,    AggregatorId::Max,
      AggregatorId::Cf1F2,   AggregatorId::Owa1,   AggregatorId::Owa2,
      AggregatorId::Owa3,    AggregatorId::Cf,     AggregatorId::Gm,
      AggregatorId::So,      AggregatorId::Hm,
  };
  return catalog;
}

std::string_view to_token(AggregatorId id) {
  switch (id) {
    case AggregatorId::Mean: return "mean";
    case AggregatorId::Median: return "median";
    case AggregatorId::Choquet: return "choquet";
    case AggregatorId::CfMm: return "cf_mm";
    case AggregatorId::Sugeno: return "sugeno";
    case AggregatorId::HSugeno: return "h_sugeno";
    case AggregatorId::FSugeno: return "f_sugeno";
    case AggregatorId::Min: return "min";
    case AggregatorId::Max: return "max";
    case AggregatorId::Cf1F2: return "cf1f2";
    case AggregatorId::Owa1: return "owa1";
    case AggregatorId::Owa2: return "owa2";
    case AggregatorId::Owa3: return "owa3";
    case AggregatorId::Cf: return "cf";
    case AggregatorId::Gm: return "gm";
    case AggregatorId::So: return "so";
    case AggregatorId::Hm: return "hm";
  }
  return "?";
}

AggregatorId aggregator_from_token(std::string_view token) {
  for (AggregatorId id : aggregator_catalog()) {
    if (to_token(id) == token) return id;
  }
  raise(ErrorCode::InvalidValue,
        "unknown aggregator token '" + std::string(token) + "'");
}

double aggregate(AggregatorId id, VectorRef x) {
  if (x.size() == 0) raise(ErrorCode::InvalidArity, "empty aggregation input");
  const int n = static_cast<int>(x.size());
  Scratch values_scratch;
  double* v = values_scratch.acquire(n);
  load_unit_values(x, v);
  sort_values(v, n);

  Scratch aux_scratch;
  auto cardinal_tails = [&]() {
    double* tail = aux_scratch.acquire(n);
    for (int i = 0; i < n; ++i) {
      tail[i] = static_cast<double>(n - i) / static_cast<double>(n);
    }
    return tail;
  };
  auto preset_owa = [&](double a, double b) {
    double* w = aux_scratch.acquire(n);
    fill_owa_weights(a, b, n, w);
    return k_owa(v, w, n);
  };

  double result = 0.0;
  switch (id) {
    case AggregatorId::Mean: result = k_mean(v, n); break;
    case AggregatorId::Median: result = k_median_sorted(v, n); break;
    case AggregatorId::Choquet: result = k_choquet(v, cardinal_tails(), n); break;
    case AggregatorId::CfMm:
      result = k_cf1f2(v, cardinal_tails(), n, BinaryFusion::Minimum,
                       BinaryFusion::Minimum);
      break;
    case AggregatorId::Sugeno: result = k_sugeno(v, cardinal_tails(), n); break;
    case AggregatorId::HSugeno:
      result = k_sugeno_hamacher(v, cardinal_tails(), n);
      break;
    case AggregatorId::FSugeno: result = k_sugeno_f(v, cardinal_tails(), n); break;
    case AggregatorId::Min: result = v[0]; break;
    case AggregatorId::Max: result = v[n - 1]; break;
    case AggregatorId::Cf1F2:
      result = k_cf1f2(v, cardinal_tails(), n, kCf1F2DefaultF1, kCf1F2DefaultF2);
      break;
    case AggregatorId::Owa1: result = preset_owa(kOwa1A, kOwa1B); break;
    case AggregatorId::Owa2: result = preset_owa(kOwa2A, kOwa2B); break;
    case AggregatorId::Owa3: result = preset_owa(kOwa3A, kOwa3B); break;
    case AggregatorId::Cf: result = k_cf_hamacher(v, cardinal_tails(), n); break;
    case AggregatorId::Gm: result = k_geometric_mean(v, n); break;
    case AggregatorId::So: result = k_sinus_overlap(v, n); break;
    case AggregatorId::Hm: result = k_harmonic_mean(v, n); break;
  }
  return clamp_unit(result);
}

}  // namespace emf::agg
