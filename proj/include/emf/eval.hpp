#pragma once

#include "emf/classifiers.hpp"
#include "emf/csp.hpp"
#include "emf/data.hpp"
#include "emf/dsp.hpp"
#include "emf/fusion.hpp"
#include "emf/types.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

// Cross-validation harness, accuracy/ITR/Q-statistic metrics, the full
// aggregator-pair grid and the exhaustive configuration search. Spatial
// filters and classifiers are fitted on training folds only; band power is a
// per-trial transform and is computed once up front. The grid and the search
// share one per-(band, classifier, split) score cache, so a grid cell and an
// independent single-config run produce identical numbers.
namespace emf::eval {

// ---------------------------------------------------------------------------
// Splits

struct SplitPlan {
  enum class Kind { KFold, RepeatedHoldout };
  Kind kind = Kind::KFold;
  int k = 5;                // KFold
  int reps = 20;            // RepeatedHoldout
  double train_frac = 0.5;  // RepeatedHoldout
  std::uint64_t seed = 1;
};

struct Split {
  std::vector<int> train;
  std::vector<int> test;
};

// Class-stratified splits; every class must land >= 2 trials in every
// training view and >= 1 in every test view, else a split error.
std::vector<Split> make_splits(const std::vector<int>& labels, int n_classes,
                               const SplitPlan& plan);

// ---------------------------------------------------------------------------
// Pipeline configuration

struct PipelineConfig {
  fusion::FusionConfig fusion;
  dsp::WindowParams window{50, 5};
  bool differentiate = true;
  // Requested spatial filters per band, indexed by BandId; capped at the
  // channel count when fitting.
  std::array<int, dsp::kBandCount> csp_components{3, 4, 6, 15, 3, 25};
  classify::Hyper hyper;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency
};

// Per-trial (differenced) band-power series for a set of bands.
struct BandSeries {
  std::vector<dsp::BandId> bands;
  std::vector<std::vector<Matrix>> series;  // [band][trial] channels x windows
  std::vector<int> labels;
  int n_classes = 0;
  int n_channels = 0;
};

BandSeries precompute_series(const data::TrialSet& set,
                             const std::vector<dsp::BandId>& bands,
                             const dsp::WindowParams& window,
                             bool differentiate, int threads);

// Test-trial scores of every (band, classifier) member for one split;
// matrices are n_test x n_classes, indexed band_pos * n_classifiers + clf_pos.
struct SplitScores {
  std::vector<Matrix> scores;
  std::vector<int> test_labels;
};

// Fits spatial filters and classifiers on the training view only and scores
// the test view. split_index seeds the per-member classifier fits.
SplitScores score_split(const BandSeries& series,
                        const std::vector<classify::ClassifierId>& classifiers,
                        const Split& split, const PipelineConfig& config,
                        int split_index);

struct ScoreCache {
  std::vector<dsp::BandId> bands;
  std::vector<classify::ClassifierId> classifiers;
  int n_classes = 0;
  std::vector<SplitScores> splits;
};

ScoreCache compute_scores(const BandSeries& series,
                          const std::vector<classify::ClassifierId>& classifiers,
                          const std::vector<Split>& splits,
                          const PipelineConfig& config);

// ---------------------------------------------------------------------------
// Cross-validation

struct CvResult {
  std::vector<double> per_split;
  double mean = 0.0;
  double stddev = 0.0;
  int zero_fallbacks = 0;
  // Correctness of each base (band, classifier) member over all test trials,
  // splits concatenated in order; feeds the Q-statistic.
  std::vector<std::pair<dsp::BandId, classify::ClassifierId>> members;
  std::vector<std::vector<char>> member_correctness;
};

CvResult run_cv(const data::TrialSet& set, const PipelineConfig& config,
                const SplitPlan& plan);

// ---------------------------------------------------------------------------
// Metrics

struct ItrInput {
  int n_classes = 2;
  double accuracy = 0.0;
  double observations = 0.0;
  double minutes = 0.0;
};

struct ItrResult {
  double bits_per_trial = 0.0;
  double bits_per_minute = 0.0;
};

ItrResult itr(const ItrInput& input);

struct ContingencyCounts {
  long n11 = 0, n10 = 0, n01 = 0, n00 = 0;
};

// Q = (n11 n00 - n01 n10) / (n11 n00 + n01 n10); 0 on a zero denominator.
double q_statistic_pair(const ContingencyCounts& counts);

// Mean pairwise Q over >= 2 equal-length correctness vectors.
double q_statistic(const std::vector<std::vector<char>>& correctness);

// ---------------------------------------------------------------------------
// Aggregator grid: frequency-phase aggregator in rows, classifier-phase in
// columns, catalog order both ways.

struct GridResult {
  Matrix accuracy;  // kAggregatorCount x kAggregatorCount
  agg::AggregatorId best_freq = agg::AggregatorId::Mean;
  agg::AggregatorId best_class = agg::AggregatorId::Mean;
  double best_accuracy = 0.0;
};

GridResult aggregator_grid(const data::TrialSet& set,
                           const PipelineConfig& base, const SplitPlan& plan);

std::string grid_to_csv(const GridResult& grid);

// ---------------------------------------------------------------------------
// Exhaustive configuration search

struct SearchOptions {
  std::vector<dsp::BandId> band_universe;                 // default: all six
  std::vector<classify::ClassifierId> classifier_universe;  // default: all five
  std::vector<std::pair<agg::AggregatorId, agg::AggregatorId>> agg_pairs;
  int top_n = 10;  // 0 keeps every configuration
};

struct SearchEntry {
  std::vector<dsp::BandId> bands;
  std::vector<classify::ClassifierId> classifiers;
  agg::AggregatorId freq_agg = agg::AggregatorId::Mean;
  agg::AggregatorId class_agg = agg::AggregatorId::Mean;
  double mean_accuracy = 0.0;
  std::vector<double> per_split;
};

// Enumerates every nonempty band subset x nonempty classifier subset x
// aggregator pair over a shared score cache. Ranked by mean accuracy; ties
// prefer fewer classifiers, then fewer bands, then catalog order.
std::vector<SearchEntry> oemf_search(const data::TrialSet& set,
                                     const SplitPlan& plan,
                                     const PipelineConfig& base,
                                     const SearchOptions& options);

std::string search_to_csv(const std::vector<SearchEntry>& entries);

// (2^bands - 1) * (2^classifiers - 1)
long long subset_pair_count(int n_bands, int n_classifiers);

// ---------------------------------------------------------------------------
// Full-data fit (for bundle persistence) and bundle application

data::PipelineModels fit_full(const data::TrialSet& set,
                              const PipelineConfig& config);

fusion::FuseResult apply_pipeline(const data::PipelineModels& models,
                                  const Matrix& trial_samples, double fs);

}  // namespace emf::eval
