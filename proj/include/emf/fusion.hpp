#pragma once

#include "emf/aggregation.hpp"
#include "emf/classifiers.hpp"
#include "emf/dsp.hpp"
#include "emf/types.hpp"

#include <string_view>
#include <vector>

// Two-phase decision engine. The frequency phase fuses, per classifier type,
// the per-band score vectors into one collective vector; the classifier phase
// fuses the collective vectors across classifier types; the decision is the
// argmax. Rows are renormalized after each phase so the inter-phase inputs
// remain valid score vectors (argmax decisions are unaffected by the positive
// rescaling, and it guards operators like SO/GM whose magnitude shrinks with
// arity). An all-zero aggregation result falls back to the uniform vector and
// is counted, never propagated as NaN.
namespace emf::fusion {

enum class FusionMode { Traditional, Mff, Emf };

std::string_view to_token(FusionMode mode);
FusionMode mode_from_token(std::string_view token);

struct FusionConfig {
  FusionMode mode = FusionMode::Emf;
  std::vector<dsp::BandId> bands;
  std::vector<classify::ClassifierId> classifiers;
  agg::AggregatorId freq_agg = agg::AggregatorId::Mean;
  agg::AggregatorId class_agg = agg::AggregatorId::Mean;
};

// Nonempty duplicate-free subsets; mff requires equal aggregators;
// traditional requires a single classifier type.
void validate(const FusionConfig& config);

std::string config_to_json(const FusionConfig& config);
FusionConfig config_from_json(const std::string& text);

// Per-trial scores of every (band, classifier) base member.
struct ScoreTensor {
  std::vector<dsp::BandId> bands;
  std::vector<classify::ClassifierId> classifiers;
  int n_classes = 0;
  std::vector<Matrix> scores;  // one classifiers x classes matrix per band

  const Matrix& band_scores(std::size_t band_index) const {
    return scores[band_index];
  }
};

struct FuseResult {
  Vector scores;
  int label = 0;
  int zero_fallbacks = 0;
};

namespace detail {

inline constexpr int kMaxFuseArity = 64;

// Renormalizes to unit sum; all-zero input becomes uniform. Returns whether
// the fallback fired.
inline bool normalize_scores(Vector& scores) {
  const double total = scores.sum();
  if (total <= 0.0) {
    scores.setConstant(1.0 / static_cast<double>(scores.size()));
    return true;
  }
  scores /= total;
  return false;
}

// Shared fusion arithmetic. `get(b, c, k)` reads the class-k score of
// classifier index c in band index b. Both the public fuse() and the
// evaluation caches go through this, so a grid cell and an independent run
// produce bit-identical numbers.
template <typename Getter>
FuseResult fuse_core(int n_bands, int n_classifiers, int n_classes,
                     FusionMode mode, agg::AggregatorId freq_agg,
                     agg::AggregatorId class_agg, Getter&& get) {
  if (n_bands < 1) raise(ErrorCode::InvalidValue, "empty band subset");
  if (n_classifiers < 1) raise(ErrorCode::InvalidValue, "empty classifier subset");
  if (n_bands > kMaxFuseArity || n_classifiers > kMaxFuseArity) {
    raise(ErrorCode::InvalidValue, "fusion arity too large");
  }
  if (mode == FusionMode::Traditional) {
    freq_agg = agg::AggregatorId::Mean;
    class_agg = agg::AggregatorId::Mean;
  }

  FuseResult result;
  double gather[kMaxFuseArity];

  // Frequency phase: one collective vector per classifier type.
  Matrix collectives(n_classifiers, n_classes);
  for (int c = 0; c < n_classifiers; ++c) {
    Vector row(n_classes);
    for (int k = 0; k < n_classes; ++k) {
      for (int b = 0; b < n_bands; ++b) gather[b] = get(b, c, k);
      row[k] = agg::aggregate(freq_agg,
                              Eigen::Map<const Vector>(gather, n_bands));
    }
    result.zero_fallbacks += normalize_scores(row) ? 1 : 0;
    collectives.row(c) = row;
  }

  // Classifier phase.
  Vector final_scores(n_classes);
  for (int k = 0; k < n_classes; ++k) {
    for (int c = 0; c < n_classifiers; ++c) gather[c] = collectives(c, k);
    final_scores[k] = agg::aggregate(
        class_agg, Eigen::Map<const Vector>(gather, n_classifiers));
  }
  result.zero_fallbacks += normalize_scores(final_scores) ? 1 : 0;

  // Argmax; ties go to the lowest class index.
  int best = 0;
  for (int k = 1; k < n_classes; ++k) {
    if (final_scores[k] > final_scores[best]) best = k;
  }
  result.scores = std::move(final_scores);
  result.label = best;
  return result;
}

}  // namespace detail

// Frequency-phase fusion alone: classifiers x classes collective matrix,
// rows renormalized. zero_fallbacks, when given, is incremented per rescue.
Matrix frequency_phase(const ScoreTensor& tensor, agg::AggregatorId aggregator,
                       int* zero_fallbacks = nullptr);

// Classifier-phase fusion of a collective matrix into one score vector.
Vector classifier_phase(const Matrix& collectives, agg::AggregatorId aggregator,
                        int* zero_fallbacks = nullptr);

// Argmax with lowest-index tie-breaking.
int decide(VectorRef final_scores);

// Full two-phase fusion (or the traditional mean path) for the subsets named
// in the config, which must be present in the tensor.
FuseResult fuse(const ScoreTensor& tensor, const FusionConfig& config);

}  // namespace emf::fusion
