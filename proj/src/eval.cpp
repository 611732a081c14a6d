#include "emf/eval.hpp"

#include "emf/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace emf::eval {

namespace {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Work items write to disjoint slots, so scheduling order cannot change any
// result; the first exception wins and is rethrown after the join.
void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  threads = std::min(resolve_threads(threads), n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<int> trial_labels(const data::TrialSet& set) {
  std::vector<int> labels;
  labels.reserve(set.trials.size());
  for (const data::Trial& t : set.trials) labels.push_back(t.label);
  return labels;
}

void append_sorted(std::vector<int>& out, const std::vector<int>& in) {
  out.insert(out.end(), in.begin(), in.end());
  std::sort(out.begin(), out.end());
}

std::vector<std::vector<int>> per_class_indices(const std::vector<int>& labels,
                                                int n_classes) {
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes) {
      raise(ErrorCode::UnknownLabel,
            "label " + std::to_string(labels[i]) + " out of range");
    }
    by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
  }
  return by_class;
}

void check_split_counts(const std::vector<Split>& splits,
                        const std::vector<int>& labels, int n_classes) {
  for (const Split& split : splits) {
    std::vector<int> train_counts(static_cast<std::size_t>(n_classes), 0);
    for (int i : split.train) ++train_counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    for (int c = 0; c < n_classes; ++c) {
      if (train_counts[static_cast<std::size_t>(c)] < 2) {
        raise(ErrorCode::SplitError,
              "class " + std::to_string(c) +
                  " has fewer than 2 training trials in a split; "
                  "stratification impossible");
      }
    }
    if (split.test.empty()) {
      raise(ErrorCode::SplitError, "empty test view in a split");
    }
  }
}

// Positions of `subset` inside `axis`.
template <typename T>
std::vector<int> positions_of(const std::vector<T>& subset,
                              const std::vector<T>& axis) {
  std::vector<int> positions;
  positions.reserve(subset.size());
  for (const T& value : subset) {
    const auto it = std::find(axis.begin(), axis.end(), value);
    if (it == axis.end()) {
      raise(ErrorCode::InvalidValue, "requested member missing from cache");
    }
    positions.push_back(static_cast<int>(it - axis.begin()));
  }
  return positions;
}

double mean_of(const std::vector<double>& values) {
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc / static_cast<double>(values.size());
}

double sample_stddev(const std::vector<double>& values, double mean) {
  if (values.size() < 2) return 0.0;
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return std::sqrt(acc / static_cast<double>(values.size() - 1));
}

// Accuracy of one (bands, classifiers, aggregators) configuration over the
// cached scores of one split.
double split_accuracy(const SplitScores& split, int n_classifiers_in_cache,
                      int n_classes, const std::vector<int>& band_pos,
                      const std::vector<int>& clf_pos,
                      agg::AggregatorId freq_agg, agg::AggregatorId class_agg,
                      fusion::FusionMode mode, int* zero_fallbacks = nullptr) {
  const int n_test = static_cast<int>(split.test_labels.size());
  int hits = 0;
  for (int row = 0; row < n_test; ++row) {
    const auto result = fusion::detail::fuse_core(
        static_cast<int>(band_pos.size()), static_cast<int>(clf_pos.size()),
        n_classes, mode, freq_agg, class_agg, [&](int b, int c, int k) {
          const int slot = band_pos[static_cast<std::size_t>(b)] *
                               n_classifiers_in_cache +
                           clf_pos[static_cast<std::size_t>(c)];
          return split.scores[static_cast<std::size_t>(slot)](row, k);
        });
    if (zero_fallbacks) *zero_fallbacks += result.zero_fallbacks;
    hits += result.label == split.test_labels[static_cast<std::size_t>(row)];
  }
  return static_cast<double>(hits) / static_cast<double>(n_test);
}

struct FittedSplitBand {
  std::vector<csp::CspModel> spatial;
  Matrix train_features;  // n_train x dim
  Matrix test_features;   // n_test x dim
};

FittedSplitBand fit_band(const BandSeries& series, int band_pos,
                         const Split& split, const PipelineConfig& config) {
  const dsp::BandId band_id = series.bands[static_cast<std::size_t>(band_pos)];
  const auto& all_series = series.series[static_cast<std::size_t>(band_pos)];

  std::vector<Matrix> train_series;
  std::vector<int> train_labels;
  train_series.reserve(split.train.size());
  for (int i : split.train) {
    train_series.push_back(all_series[static_cast<std::size_t>(i)]);
    train_labels.push_back(series.labels[static_cast<std::size_t>(i)]);
  }

  FittedSplitBand fitted;
  const int requested =
      config.csp_components[static_cast<std::size_t>(band_id)];
  fitted.spatial =
      csp::fit_csp_ovr(train_series, train_labels, band_id, requested);

  const auto featurize = [&](const std::vector<int>& idx) {
    Matrix features;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const Vector f = csp::transform(
          fitted.spatial, all_series[static_cast<std::size_t>(idx[r])]);
      if (features.size() == 0) {
        features.resize(static_cast<Eigen::Index>(idx.size()), f.size());
      }
      features.row(static_cast<Eigen::Index>(r)) = f.transpose();
    }
    return features;
  };
  fitted.train_features = featurize(split.train);
  fitted.test_features = featurize(split.test);
  return fitted;
}

}  // namespace

std::vector<Split> make_splits(const std::vector<int>& labels, int n_classes,
                               const SplitPlan& plan) {
  if (labels.empty()) raise(ErrorCode::SplitError, "no trials to split");
  const auto by_class = per_class_indices(labels, n_classes);

  std::vector<Split> splits;
  if (plan.kind == SplitPlan::Kind::KFold) {
    if (plan.k < 2) raise(ErrorCode::SplitError, "k-fold needs k >= 2");
    std::vector<std::vector<int>> folds(static_cast<std::size_t>(plan.k));
    for (int c = 0; c < n_classes; ++c) {
      std::vector<int> idx = by_class[static_cast<std::size_t>(c)];
      Rng rng(derive_seed(plan.seed, 0xF01D, static_cast<std::uint64_t>(c)));
      rng.shuffle(idx);
      for (std::size_t j = 0; j < idx.size(); ++j) {
        folds[j % static_cast<std::size_t>(plan.k)].push_back(idx[j]);
      }
    }
    splits.resize(static_cast<std::size_t>(plan.k));
    for (int f = 0; f < plan.k; ++f) {
      Split& split = splits[static_cast<std::size_t>(f)];
      append_sorted(split.test, folds[static_cast<std::size_t>(f)]);
      for (int g = 0; g < plan.k; ++g) {
        if (g != f) append_sorted(split.train, folds[static_cast<std::size_t>(g)]);
      }
      std::sort(split.train.begin(), split.train.end());
    }
  } else {
    if (plan.reps < 1) raise(ErrorCode::SplitError, "need at least 1 repetition");
    if (!(plan.train_frac > 0.0 && plan.train_frac < 1.0)) {
      raise(ErrorCode::SplitError, "train fraction must lie in (0, 1)");
    }
    splits.resize(static_cast<std::size_t>(plan.reps));
    for (int r = 0; r < plan.reps; ++r) {
      Split& split = splits[static_cast<std::size_t>(r)];
      for (int c = 0; c < n_classes; ++c) {
        std::vector<int> idx = by_class[static_cast<std::size_t>(c)];
        Rng rng(derive_seed(plan.seed, 0x801D + static_cast<std::uint64_t>(r),
                            static_cast<std::uint64_t>(c)));
        rng.shuffle(idx);
        const auto n_train = static_cast<std::size_t>(
            std::lround(plan.train_frac * static_cast<double>(idx.size())));
        if (n_train < 2 || n_train >= idx.size()) {
          raise(ErrorCode::SplitError,
                "train fraction leaves class " + std::to_string(c) +
                    " without enough trials on one side");
        }
        split.train.insert(split.train.end(), idx.begin(),
                           idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        split.test.insert(split.test.end(),
                          idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                          idx.end());
      }
      std::sort(split.train.begin(), split.train.end());
      std::sort(split.test.begin(), split.test.end());
    }
  }
  check_split_counts(splits, labels, n_classes);
  return splits;
}

BandSeries precompute_series(const data::TrialSet& set,
                             const std::vector<dsp::BandId>& bands,
                             const dsp::WindowParams& window,
                             bool differentiate, int threads) {
  data::validate(set);
  if (bands.empty()) raise(ErrorCode::InvalidValue, "no bands requested");

  std::vector<dsp::WaveBand> wave_bands;
  wave_bands.reserve(bands.size());
  for (dsp::BandId id : bands) wave_bands.push_back(dsp::band(id));

  BandSeries out;
  out.bands = bands;
  out.labels = trial_labels(set);
  out.n_classes = set.n_classes();
  out.n_channels = set.n_channels();
  out.series.assign(bands.size(),
                    std::vector<Matrix>(set.trials.size()));

  const int n_trials = static_cast<int>(set.trials.size());
  parallel_for(n_trials, threads, [&](int t) {
    const auto series = dsp::band_power_all(
        set.trials[static_cast<std::size_t>(t)].samples, set.fs, wave_bands,
        window);
    for (std::size_t b = 0; b < bands.size(); ++b) {
      out.series[b][static_cast<std::size_t>(t)] =
          differentiate ? dsp::differentiate(series[b].power)
                        : series[b].power;
    }
  });
  return out;
}

SplitScores score_split(const BandSeries& series,
                        const std::vector<classify::ClassifierId>& classifiers,
                        const Split& split, const PipelineConfig& config,
                        int split_index) {
  const int n_bands = static_cast<int>(series.bands.size());
  const int n_classifiers = static_cast<int>(classifiers.size());

  std::vector<FittedSplitBand> fitted(static_cast<std::size_t>(n_bands));
  parallel_for(n_bands, config.threads, [&](int b) {
    fitted[static_cast<std::size_t>(b)] = fit_band(series, b, split, config);
  });

  std::vector<int> train_labels, test_labels;
  for (int i : split.train) train_labels.push_back(series.labels[static_cast<std::size_t>(i)]);
  for (int i : split.test) test_labels.push_back(series.labels[static_cast<std::size_t>(i)]);

  SplitScores out;
  out.test_labels = test_labels;
  out.scores.assign(static_cast<std::size_t>(n_bands * n_classifiers), Matrix());

  parallel_for(n_bands * n_classifiers, config.threads, [&](int slot) {
    const int b = slot / n_classifiers;
    const int c = slot % n_classifiers;
    const classify::ClassifierId clf_id = classifiers[static_cast<std::size_t>(c)];

    classify::Dataset train;
    train.X = fitted[static_cast<std::size_t>(b)].train_features;
    train.y = train_labels;
    train.n_classes = series.n_classes;
    // Seeds key on the stable band/classifier identities (not cache
    // positions), so a member's fit is identical no matter which subset of
    // the catalog the cache was built for.
    const auto seed = derive_seed(
        config.seed, 0x5EED0000ULL + static_cast<std::uint64_t>(split_index),
        static_cast<std::uint64_t>(series.bands[static_cast<std::size_t>(b)]),
        static_cast<std::uint64_t>(clf_id));
    const classify::Model model = classify::fit(clf_id, train, config.hyper, seed);

    const Matrix& test_features = fitted[static_cast<std::size_t>(b)].test_features;
    Matrix scores(test_features.rows(), series.n_classes);
    for (Eigen::Index row = 0; row < test_features.rows(); ++row) {
      scores.row(row) =
          classify::predict_scores(model, test_features.row(row).transpose())
              .transpose();
    }
    out.scores[static_cast<std::size_t>(slot)] = std::move(scores);
  });
  return out;
}

ScoreCache compute_scores(const BandSeries& series,
                          const std::vector<classify::ClassifierId>& classifiers,
                          const std::vector<Split>& splits,
                          const PipelineConfig& config) {
  ScoreCache cache;
  cache.bands = series.bands;
  cache.classifiers = classifiers;
  cache.n_classes = series.n_classes;
  cache.splits.resize(splits.size());
  for (std::size_t s = 0; s < splits.size(); ++s) {
    cache.splits[s] = score_split(series, classifiers, splits[s], config,
                                  static_cast<int>(s));
  }
  return cache;
}

CvResult run_cv(const data::TrialSet& set, const PipelineConfig& config,
                const SplitPlan& plan) {
  fusion::validate(config.fusion);
  const BandSeries series =
      precompute_series(set, config.fusion.bands, config.window,
                        config.differentiate, config.threads);
  const auto splits = make_splits(series.labels, series.n_classes, plan);
  const ScoreCache cache =
      compute_scores(series, config.fusion.classifiers, splits, config);

  const int n_bands = static_cast<int>(cache.bands.size());
  const int n_classifiers = static_cast<int>(cache.classifiers.size());
  std::vector<int> all_bands(static_cast<std::size_t>(n_bands));
  std::iota(all_bands.begin(), all_bands.end(), 0);
  std::vector<int> all_clfs(static_cast<std::size_t>(n_classifiers));
  std::iota(all_clfs.begin(), all_clfs.end(), 0);

  CvResult result;
  for (int b = 0; b < n_bands; ++b) {
    for (int c = 0; c < n_classifiers; ++c) {
      result.members.emplace_back(cache.bands[static_cast<std::size_t>(b)],
                                  cache.classifiers[static_cast<std::size_t>(c)]);
    }
  }
  result.member_correctness.resize(result.members.size());

  for (const SplitScores& split : cache.splits) {
    result.per_split.push_back(split_accuracy(
        split, n_classifiers, cache.n_classes, all_bands, all_clfs,
        config.fusion.freq_agg, config.fusion.class_agg, config.fusion.mode,
        &result.zero_fallbacks));
    // Base-member correctness for diversity metrics.
    for (std::size_t m = 0; m < result.members.size(); ++m) {
      const Matrix& scores = split.scores[m];
      for (Eigen::Index row = 0; row < scores.rows(); ++row) {
        Eigen::Index best = 0;
        scores.row(row).maxCoeff(&best);
        result.member_correctness[m].push_back(
            static_cast<int>(best) ==
            split.test_labels[static_cast<std::size_t>(row)]);
      }
    }
  }
  result.mean = mean_of(result.per_split);
  result.stddev = sample_stddev(result.per_split, result.mean);
  return result;
}

ItrResult itr(const ItrInput& input) {
  if (input.n_classes < 2) raise(ErrorCode::InvalidValue, "ITR needs N >= 2");
  if (input.accuracy < 0.0 || input.accuracy > 1.0) {
    raise(ErrorCode::InvalidValue, "accuracy must lie in [0, 1]");
  }
  if (input.minutes <= 0.0) {
    raise(ErrorCode::InvalidValue, "total time must be positive");
  }
  const double n = static_cast<double>(input.n_classes);
  const double p = input.accuracy;
  double bits = std::log2(n);
  if (p > 0.0) bits += p * std::log2(p);
  if (p < 1.0) bits += (1.0 - p) * std::log2((1.0 - p) / (n - 1.0));

  ItrResult result;
  result.bits_per_trial = bits;
  result.bits_per_minute = bits * (input.observations / input.minutes);
  return result;
}

double q_statistic_pair(const ContingencyCounts& counts) {
  const double num = static_cast<double>(counts.n11) * counts.n00 -
                     static_cast<double>(counts.n01) * counts.n10;
  const double den = static_cast<double>(counts.n11) * counts.n00 +
                     static_cast<double>(counts.n01) * counts.n10;
  if (den == 0.0) return 0.0;
  return num / den;
}

double q_statistic(const std::vector<std::vector<char>>& correctness) {
  if (correctness.size() < 2) {
    raise(ErrorCode::InvalidValue, "Q-statistic needs at least 2 classifiers");
  }
  const std::size_t n = correctness.front().size();
  for (const auto& v : correctness) {
    if (v.size() != n) {
      raise(ErrorCode::DimensionMismatch,
            "correctness vectors have different lengths");
    }
  }
  double total = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < correctness.size(); ++i) {
    for (std::size_t j = i + 1; j < correctness.size(); ++j) {
      ContingencyCounts counts;
      for (std::size_t t = 0; t < n; ++t) {
        const bool a = correctness[i][t];
        const bool b = correctness[j][t];
        if (a && b) ++counts.n11;
        else if (a && !b) ++counts.n10;
        else if (!a && b) ++counts.n01;
        else ++counts.n00;
      }
      total += q_statistic_pair(counts);
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

GridResult aggregator_grid(const data::TrialSet& set,
                           const PipelineConfig& base, const SplitPlan& plan) {
  fusion::validate(base.fusion);
  const BandSeries series = precompute_series(
      set, base.fusion.bands, base.window, base.differentiate, base.threads);
  const auto splits = make_splits(series.labels, series.n_classes, plan);
  const ScoreCache cache =
      compute_scores(series, base.fusion.classifiers, splits, base);

  const int n_classifiers = static_cast<int>(cache.classifiers.size());
  std::vector<int> all_bands(cache.bands.size());
  std::iota(all_bands.begin(), all_bands.end(), 0);
  std::vector<int> all_clfs(cache.classifiers.size());
  std::iota(all_clfs.begin(), all_clfs.end(), 0);

  const auto& catalog = agg::aggregator_catalog();
  GridResult grid;
  grid.accuracy.resize(agg::kAggregatorCount, agg::kAggregatorCount);

  parallel_for(agg::kAggregatorCount * agg::kAggregatorCount, base.threads,
               [&](int cell) {
                 const int fi = cell / agg::kAggregatorCount;
                 const int ci = cell % agg::kAggregatorCount;
                 std::vector<double> accs;
                 accs.reserve(cache.splits.size());
                 for (const SplitScores& split : cache.splits) {
                   accs.push_back(split_accuracy(
                       split, n_classifiers, cache.n_classes, all_bands,
                       all_clfs, catalog[static_cast<std::size_t>(fi)],
                       catalog[static_cast<std::size_t>(ci)],
                       fusion::FusionMode::Emf));
                 }
                 grid.accuracy(fi, ci) = mean_of(accs);
               });

  grid.best_accuracy = -1.0;
  for (int fi = 0; fi < agg::kAggregatorCount; ++fi) {
    for (int ci = 0; ci < agg::kAggregatorCount; ++ci) {
      if (grid.accuracy(fi, ci) > grid.best_accuracy) {
        grid.best_accuracy = grid.accuracy(fi, ci);
        grid.best_freq = catalog[static_cast<std::size_t>(fi)];
        grid.best_class = catalog[static_cast<std::size_t>(ci)];
      }
    }
  }
  return grid;
}

std::string grid_to_csv(const GridResult& grid) {
  std::ostringstream out;
  out << "freq_agg";
  for (agg::AggregatorId id : agg::aggregator_catalog()) {
    out << ',' << agg::to_token(id);
  }
  out << '\n';
  const auto& catalog = agg::aggregator_catalog();
  char buf[32];
  for (int fi = 0; fi < agg::kAggregatorCount; ++fi) {
    out << agg::to_token(catalog[static_cast<std::size_t>(fi)]);
    for (int ci = 0; ci < agg::kAggregatorCount; ++ci) {
      std::snprintf(buf, sizeof(buf), "%.6f", grid.accuracy(fi, ci));
      out << ',' << buf;
    }
    out << '\n';
  }
  return out.str();
}

long long subset_pair_count(int n_bands, int n_classifiers) {
  if (n_bands < 0 || n_bands > 62 || n_classifiers < 0 || n_classifiers > 62) {
    raise(ErrorCode::InvalidValue, "subset count out of range");
  }
  return ((1LL << n_bands) - 1) * ((1LL << n_classifiers) - 1);
}

std::vector<SearchEntry> oemf_search(const data::TrialSet& set,
                                     const SplitPlan& plan,
                                     const PipelineConfig& base,
                                     const SearchOptions& options) {
  std::vector<dsp::BandId> band_universe = options.band_universe;
  if (band_universe.empty()) {
    for (const dsp::WaveBand& b : dsp::band_catalog()) band_universe.push_back(b.id);
  }
  std::vector<classify::ClassifierId> clf_universe = options.classifier_universe;
  if (clf_universe.empty()) {
    for (classify::ClassifierId c : classify::classifier_catalog()) {
      clf_universe.push_back(c);
    }
  }
  std::vector<std::pair<agg::AggregatorId, agg::AggregatorId>> pairs =
      options.agg_pairs;
  if (pairs.empty()) {
    for (agg::AggregatorId f : agg::aggregator_catalog()) {
      for (agg::AggregatorId c : agg::aggregator_catalog()) {
        pairs.emplace_back(f, c);
      }
    }
  }

  const int nb = static_cast<int>(band_universe.size());
  const int nc = static_cast<int>(clf_universe.size());
  if (nb > 16 || nc > 16) {
    raise(ErrorCode::InvalidValue, "search universe too large");
  }

  const BandSeries series = precompute_series(set, band_universe, base.window,
                                              base.differentiate, base.threads);
  const auto splits = make_splits(series.labels, series.n_classes, plan);
  const ScoreCache cache = compute_scores(series, clf_universe, splits, base);

  // Packed result per configuration, filled in parallel, then ranked.
  struct Packed {
    double mean = 0.0;
    std::uint32_t band_mask = 0;
    std::uint32_t clf_mask = 0;
    std::uint16_t pair_index = 0;
  };

  const std::uint32_t band_limit = (1u << nb);
  const std::uint32_t clf_limit = (1u << nc);
  const std::size_t n_subsets =
      static_cast<std::size_t>(band_limit - 1) * (clf_limit - 1);
  const std::size_t n_configs = n_subsets * pairs.size();
  std::vector<Packed> packed(n_configs);

  const auto mask_positions = [](std::uint32_t mask, int limit_bits) {
    std::vector<int> positions;
    for (int bit = 0; bit < limit_bits; ++bit) {
      if (mask & (1u << bit)) positions.push_back(bit);
    }
    return positions;
  };

  parallel_for(static_cast<int>(n_subsets), base.threads, [&](int subset_index) {
    const std::uint32_t band_mask =
        1u + static_cast<std::uint32_t>(subset_index) / (clf_limit - 1);
    const std::uint32_t clf_mask =
        1u + static_cast<std::uint32_t>(subset_index) % (clf_limit - 1);
    const auto band_pos = mask_positions(band_mask, nb);
    const auto clf_pos = mask_positions(clf_mask, nc);

    for (std::size_t p = 0; p < pairs.size(); ++p) {
      std::vector<double> accs;
      accs.reserve(cache.splits.size());
      for (const SplitScores& split : cache.splits) {
        accs.push_back(split_accuracy(split, nc, cache.n_classes, band_pos,
                                      clf_pos, pairs[p].first, pairs[p].second,
                                      fusion::FusionMode::Emf));
      }
      Packed& slot =
          packed[static_cast<std::size_t>(subset_index) * pairs.size() + p];
      slot.mean = mean_of(accs);
      slot.band_mask = band_mask;
      slot.clf_mask = clf_mask;
      slot.pair_index = static_cast<std::uint16_t>(p);
    }
  });

  // Rank: accuracy descending; ties prefer fewer classifiers, fewer bands,
  // then catalog order of the masks and aggregator pair.
  std::sort(packed.begin(), packed.end(), [](const Packed& a, const Packed& b) {
    if (a.mean != b.mean) return a.mean > b.mean;
    const int a_nc = __builtin_popcount(a.clf_mask);
    const int b_nc = __builtin_popcount(b.clf_mask);
    if (a_nc != b_nc) return a_nc < b_nc;
    const int a_nb = __builtin_popcount(a.band_mask);
    const int b_nb = __builtin_popcount(b.band_mask);
    if (a_nb != b_nb) return a_nb < b_nb;
    if (a.band_mask != b.band_mask) return a.band_mask < b.band_mask;
    if (a.clf_mask != b.clf_mask) return a.clf_mask < b.clf_mask;
    return a.pair_index < b.pair_index;
  });

  const std::size_t keep =
      options.top_n > 0
          ? std::min<std::size_t>(static_cast<std::size_t>(options.top_n),
                                  packed.size())
          : packed.size();

  std::vector<SearchEntry> entries;
  entries.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    const Packed& slot = packed[i];
    SearchEntry entry;
    for (int bit = 0; bit < nb; ++bit) {
      if (slot.band_mask & (1u << bit)) {
        entry.bands.push_back(band_universe[static_cast<std::size_t>(bit)]);
      }
    }
    for (int bit = 0; bit < nc; ++bit) {
      if (slot.clf_mask & (1u << bit)) {
        entry.classifiers.push_back(clf_universe[static_cast<std::size_t>(bit)]);
      }
    }
    entry.freq_agg = pairs[slot.pair_index].first;
    entry.class_agg = pairs[slot.pair_index].second;
    entry.mean_accuracy = slot.mean;

    const auto band_pos = positions_of(entry.bands, cache.bands);
    const auto clf_pos = positions_of(entry.classifiers, cache.classifiers);
    for (const SplitScores& split : cache.splits) {
      entry.per_split.push_back(
          split_accuracy(split, nc, cache.n_classes, band_pos, clf_pos,
                         entry.freq_agg, entry.class_agg, fusion::FusionMode::Emf));
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::string search_to_csv(const std::vector<SearchEntry>& entries) {
  std::ostringstream out;
  out << "rank,bands,classifiers,freq_agg,class_agg,accuracy\n";
  char buf[32];
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const SearchEntry& e = entries[i];
    out << (i + 1) << ',';
    for (std::size_t b = 0; b < e.bands.size(); ++b) {
      out << (b ? "+" : "") << dsp::to_token(e.bands[b]);
    }
    out << ',';
    for (std::size_t c = 0; c < e.classifiers.size(); ++c) {
      out << (c ? "+" : "") << classify::to_token(e.classifiers[c]);
    }
    std::snprintf(buf, sizeof(buf), "%.6f", e.mean_accuracy);
    out << ',' << agg::to_token(e.freq_agg) << ',' << agg::to_token(e.class_agg)
        << ',' << buf << '\n';
  }
  return out.str();
}

data::PipelineModels fit_full(const data::TrialSet& set,
                              const PipelineConfig& config) {
  fusion::validate(config.fusion);
  const BandSeries series =
      precompute_series(set, config.fusion.bands, config.window,
                        config.differentiate, config.threads);

  Split everything;
  everything.train.resize(set.trials.size());
  std::iota(everything.train.begin(), everything.train.end(), 0);
  everything.test = everything.train;

  data::PipelineModels models;
  models.fs = set.fs;
  models.channels = set.n_channels();
  models.n_classes = set.n_classes();
  models.window = config.window;
  models.differentiate = config.differentiate;
  models.config = config.fusion;

  const int n_bands = static_cast<int>(series.bands.size());
  models.bands.resize(static_cast<std::size_t>(n_bands));
  parallel_for(n_bands, config.threads, [&](int b) {
    const FittedSplitBand fitted = fit_band(series, b, everything, config);
    data::FittedBand& band = models.bands[static_cast<std::size_t>(b)];
    band.band = series.bands[static_cast<std::size_t>(b)];
    band.n_components =
        config.csp_components[static_cast<std::size_t>(band.band)];
    band.spatial = fitted.spatial;

    classify::Dataset train;
    train.X = fitted.train_features;
    train.y = series.labels;
    train.n_classes = series.n_classes;
    for (classify::ClassifierId id : config.fusion.classifiers) {
      const auto seed =
          derive_seed(config.seed, 0x5EED0000ULL,
                      static_cast<std::uint64_t>(band.band),
                      static_cast<std::uint64_t>(id));
      band.members.emplace_back(id,
                                classify::fit(id, train, config.hyper, seed));
    }
  });
  return models;
}

fusion::FuseResult apply_pipeline(const data::PipelineModels& models,
                                  const Matrix& trial_samples, double fs) {
  if (trial_samples.rows() != models.channels) {
    raise(ErrorCode::DimensionMismatch,
          "trial has " + std::to_string(trial_samples.rows()) +
              " channels, bundle expects " + std::to_string(models.channels));
  }
  fusion::ScoreTensor tensor;
  tensor.n_classes = models.n_classes;
  for (const data::FittedBand& band : models.bands) {
    tensor.bands.push_back(band.band);
    auto power =
        dsp::band_power(trial_samples, fs, dsp::band(band.band), models.window)
            .power;
    const Matrix series =
        models.differentiate ? dsp::differentiate(power) : std::move(power);
    const Vector features = csp::transform(band.spatial, series);

    Matrix slice(static_cast<Eigen::Index>(band.members.size()),
                 models.n_classes);
    for (std::size_t m = 0; m < band.members.size(); ++m) {
      slice.row(static_cast<Eigen::Index>(m)) =
          classify::predict_scores(band.members[m].second, features).transpose();
    }
    tensor.scores.push_back(std::move(slice));
  }
  for (const auto& [id, model] : models.bands.front().members) {
    tensor.classifiers.push_back(id);
  }
  return fusion::fuse(tensor, models.config);
}

}  // namespace emf::eval
