#pragma once

#include "emf/types.hpp"

#include <array>
#include <string>
#include <string_view>
#include <vector>

// n-ary aggregation operators over unit-interval vectors: classical means,
// Choquet/Sugeno integrals and their t-norm generalizations, quantifier-based
// OWA operators and n-dimensional overlap functions. All operators act on
// order statistics only, so they are invariant under permutation of the
// input. Inputs are validated to lie in [0, 1] (up to 1e-9 slack, which is
// clamped); outputs of the generalized Choquet sums are clamped back to
// [0, 1] since those sums are not range-safe for every fusion pair.
namespace emf::agg {

// Symmetric fuzzy measure: the value of a subset depends only on its
// cardinality. by_cardinality[k] is the measure of any k-element subset.
struct FuzzyMeasure {
  std::vector<double> by_cardinality;

  int n() const { return static_cast<int>(by_cardinality.size()) - 1; }
  double of_cardinality(int k) const { return by_cardinality[k]; }
  // m(A_i) with A_i = {i, ..., n}, |A_i| = n - i + 1; rank is 1-based.
  double tail(int rank) const { return by_cardinality[n() - rank + 1]; }
};

// m(k) = k/n. Makes the Choquet integral collapse to the arithmetic mean,
// which the tests exploit as an independent cross-check.
FuzzyMeasure cardinal_measure(int n);

// Validates boundary conditions and monotonicity.
FuzzyMeasure make_measure(std::vector<double> by_cardinality);

// Ascending rearrangement of an input vector together with the tail measures
// the fuzzy integrals consume. Ties keep original order (stable), which
// cannot change any operator value but keeps logs reproducible.
struct SortedInput {
  Vector sorted;                // ascending; sorted[i] == x[perm[i]]
  std::vector<int> perm;
  Vector tail_measures;         // m(A_i) for i = 1..n
};

SortedInput sort_ascending(VectorRef x, const FuzzyMeasure& m);

// 0 when x = y = 0, else xy / (x + y - xy).
double hamacher_tnorm(double x, double y);

enum class BinaryFusion { Product, Minimum, Hamacher };

double choquet(VectorRef x, const FuzzyMeasure& m);
double cf_hamacher(VectorRef x, const FuzzyMeasure& m);
double cf1f2(VectorRef x, const FuzzyMeasure& m, BinaryFusion f1,
             BinaryFusion f2);
double sugeno(VectorRef x, const FuzzyMeasure& m);
// Sugeno with the Hamacher t-norm replacing the minimum.
double sugeno_hamacher(VectorRef x, const FuzzyMeasure& m);
// Sugeno with the product replacing the minimum.
double sugeno_f(VectorRef x, const FuzzyMeasure& m);

struct OwaWeights {
  double a = 0.0;
  double b = 1.0;
  Vector weights;
};

// w_i = Q(i/n) - Q((i-1)/n) for the piecewise-linear quantifier
// Q_{a,b}(t) = 0 for t < a, 1 for t > b, (t-a)/(b-a) otherwise.
OwaWeights owa_weights(double a, double b, int n);

// Weighted sum over the descending rearrangement of x.
double owa(VectorRef x, const OwaWeights& w);

enum class OverlapKind { HarmonicMean, SinusOverlap, GeometricMean, Minimum };

// HM = n / sum(1/x_i) (0 if any input is 0), SO = sin(pi/2 * prod x_i),
// GM = (prod x_i)^(1/n), Min = min(x).
double overlap(VectorRef x, OverlapKind kind);

enum class ClassicalKind { Mean, Median, Min, Max };

// Even-length median is the midpoint of the two central order statistics.
double classical(VectorRef x, ClassicalKind kind);

// The 17 operators of the fusion grid, in the fixed catalog order used by
// every report, config file and CLI flag.
enum class AggregatorId {
  Mean,
  Median,
  Choquet,
  CfMm,
  Sugeno,
  HSugeno,
  FSugeno,
  Min,
  Max,
  Cf1F2,
  Owa1,
  Owa2,
  Owa3,
  Cf,
  Gm,
  So,
  Hm,
};

inline constexpr int kAggregatorCount = 17;

// OWA quantifier parameters for the three preset operators.
inline constexpr double kOwa1A = 0.1, kOwa1B = 0.5;
inline constexpr double kOwa2A = 0.5, kOwa2B = 1.0;
inline constexpr double kOwa3A = 0.3, kOwa3B = 0.8;

// Fusion pair behind the plain "cf1f2" id. Distinct from Choquet
// (product/product) and CfMm (min/min).
inline constexpr BinaryFusion kCf1F2DefaultF1 = BinaryFusion::Product;
inline constexpr BinaryFusion kCf1F2DefaultF2 = BinaryFusion::Minimum;

const std::array<AggregatorId, kAggregatorCount>& aggregator_catalog();

std::string_view to_token(AggregatorId id);
AggregatorId aggregator_from_token(std::string_view token);

// Uniform dispatch: builds the cardinal measure / OWA weights for n = |x| on
// the fly and clamps the result to [0, 1]. This is the only aggregation entry
// point the fusion engine and the search use.
double aggregate(AggregatorId id, VectorRef x);

}  // namespace emf::agg
