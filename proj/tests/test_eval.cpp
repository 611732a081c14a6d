#include "emf/eval.hpp"

#include "doctest.h"
#include "emf/rng.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>

using namespace emf;
using namespace emf::eval;
using agg::AggregatorId;
using classify::ClassifierId;
using dsp::BandId;

namespace {

PipelineConfig small_config() {
  PipelineConfig config;
  config.fusion.mode = fusion::FusionMode::Emf;
  config.fusion.bands = {BandId::Alpha, BandId::Beta};
  config.fusion.classifiers = {ClassifierId::Lda, ClassifierId::Knn};
  config.fusion.freq_agg = AggregatorId::Mean;
  config.fusion.class_agg = AggregatorId::Mean;
  config.threads = 2;
  config.seed = 5;
  return config;
}

data::TrialSet separable_set(std::uint64_t seed, int per_class = 24) {
  data::SynthSpec spec;
  spec.trials_per_class = per_class;
  spec.erd_depth = 0.95;
  spec.snr = 16.0;
  spec.seed = seed;
  return data::generate_synthetic(spec);
}

// Noise-only trials with alternating labels; used by the leakage canary.
data::TrialSet noise_set(Rng& rng, int n_trials) {
  data::TrialSet set;
  set.name = "noise";
  set.fs = 250.0;
  set.channels = {"C3", "C4", "CP3", "CP4"};
  set.classes = {"left", "right"};
  for (int t = 0; t < n_trials; ++t) {
    data::Trial trial;
    trial.label = t % 2;
    trial.samples.resize(4, 250);
    for (int c = 0; c < 4; ++c) {
      for (int i = 0; i < 250; ++i) trial.samples(c, i) = rng.normal();
    }
    set.trials.push_back(std::move(trial));
  }
  return set;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("stratified k-fold splits") {
  std::vector<int> labels(800);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = static_cast<int>(i % 2);
  }
  SplitPlan plan;
  plan.k = 5;
  plan.seed = 3;
  const auto splits = make_splits(labels, 2, plan);
  REQUIRE(splits.size() == 5);

  std::vector<int> seen(800, 0);
  for (const Split& split : splits) {
    CHECK(split.test.size() == 160);
    CHECK(split.train.size() == 640);
    int per_class[2] = {0, 0};
    for (int i : split.test) {
      ++per_class[labels[static_cast<std::size_t>(i)]];
      ++seen[static_cast<std::size_t>(i)];
    }
    CHECK(per_class[0] == 80);
    CHECK(per_class[1] == 80);
    CHECK(std::is_sorted(split.train.begin(), split.train.end()));
  }
  for (int count : seen) CHECK(count == 1);  // folds partition the trials

  // Bit-identical under the same seed, different under another.
  const auto again = make_splits(labels, 2, plan);
  for (std::size_t s = 0; s < splits.size(); ++s) {
    CHECK(splits[s].train == again[s].train);
    CHECK(splits[s].test == again[s].test);
  }
  plan.seed = 4;
  const auto moved = make_splits(labels, 2, plan);
  CHECK(moved[0].test != splits[0].test);
}

TEST_CASE("repeated holdout splits") {
  std::vector<int> labels(288);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = static_cast<int>(i % 4);
  }
  SplitPlan plan;
  plan.kind = SplitPlan::Kind::RepeatedHoldout;
  plan.reps = 20;
  plan.train_frac = 0.5;
  plan.seed = 9;
  const auto splits = make_splits(labels, 4, plan);
  REQUIRE(splits.size() == 20);
  for (const Split& split : splits) {
    CHECK(split.train.size() == 144);
    CHECK(split.test.size() == 144);
  }
  CHECK(splits[0].train != splits[1].train);
}

TEST_CASE("split errors") {
  SplitPlan plan;
  plan.k = 5;
  std::vector<int> tiny{0, 0, 0, 1, 1, 1};  // 6 trials cannot stratify 5 folds
  CHECK_THROWS_AS(make_splits(tiny, 2, plan), Error);

  SplitPlan holdout;
  holdout.kind = SplitPlan::Kind::RepeatedHoldout;
  holdout.train_frac = 1.5;
  CHECK_THROWS_AS(make_splits(tiny, 2, holdout), Error);
}

TEST_CASE("itr anchors") {
  CHECK(itr({2, 1.0, 60.0, 1.0}).bits_per_trial == 1.0);
  CHECK(itr({2, 0.5, 60.0, 1.0}).bits_per_trial == 0.0);
  CHECK(itr({4, 1.0, 60.0, 1.0}).bits_per_trial == 2.0);

  const ItrResult r = itr({2, 1.0, 120.0, 2.0});
  CHECK(r.bits_per_minute == doctest::Approx(60.0));

  CHECK_THROWS_AS(itr({1, 0.5, 60.0, 1.0}), Error);
  CHECK_THROWS_AS(itr({2, 0.5, 60.0, 0.0}), Error);
  CHECK_THROWS_AS(itr({2, 1.5, 60.0, 1.0}), Error);
}

TEST_CASE("q statistic") {
  std::vector<char> a{1, 1, 0, 0, 1, 0, 1, 1};
  CHECK(q_statistic({a, a}) == 1.0);

  std::vector<char> b(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) b[i] = !a[i];
  CHECK(q_statistic({a, b}) == -1.0);

  // Independent coin flips stay near zero.
  Rng rng(701);
  std::vector<char> x(10000), y(10000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.uniform() < 0.5;
    y[i] = rng.uniform() < 0.5;
  }
  CHECK(std::abs(q_statistic({x, y})) < 0.05);

  // Degenerate pair (one classifier always right) contributes zero.
  std::vector<char> always(8, 1);
  const ContingencyCounts counts{4, 4, 0, 0};
  CHECK(q_statistic_pair(counts) == 0.0);
  CHECK(q_statistic({always, a}) == 0.0);

  CHECK_THROWS_AS(q_statistic({a}), Error);
  CHECK_THROWS_AS(q_statistic({a, std::vector<char>{1, 0}}), Error);
}

TEST_CASE("cv reaches full accuracy on a separable fixture") {
  const data::TrialSet set = separable_set(21);
  SplitPlan plan;
  plan.k = 4;
  plan.seed = 2;
  const CvResult result = run_cv(set, small_config(), plan);
  REQUIRE(result.per_split.size() == 4);
  CHECK(result.mean == 1.0);
  CHECK(result.stddev == 0.0);
  CHECK(result.members.size() == 4);  // 2 bands x 2 classifiers
  for (const auto& correctness : result.member_correctness) {
    CHECK(correctness.size() == set.trials.size());
  }
}

TEST_CASE("cv sits at chance without class information") {
  data::SynthSpec spec;
  spec.trials_per_class = 100;
  spec.erd_depth = 0.0;
  spec.snr = 4.0;
  spec.seed = 31;
  const data::TrialSet set = data::generate_synthetic(spec);

  PipelineConfig config = small_config();
  config.fusion.bands = {BandId::Alpha};
  config.fusion.classifiers = {ClassifierId::Lda};
  SplitPlan plan;
  plan.k = 5;
  plan.seed = 7;
  const CvResult result = run_cv(set, config, plan);
  CHECK(result.mean >= 0.4);
  CHECK(result.mean <= 0.6);
}

TEST_CASE("cv is reproducible bit for bit") {
  const data::TrialSet set = separable_set(23, 12);
  SplitPlan plan;
  plan.k = 3;
  plan.seed = 11;
  PipelineConfig config = small_config();
  config.fusion.classifiers = {ClassifierId::Svm, ClassifierId::Lda};
  const CvResult a = run_cv(set, config, plan);
  const CvResult b = run_cv(set, config, plan);
  CHECK(a.per_split == b.per_split);
  CHECK(a.mean == b.mean);
  for (std::size_t m = 0; m < a.member_correctness.size(); ++m) {
    CHECK(a.member_correctness[m] == b.member_correctness[m]);
  }
}

TEST_CASE("grid cells equal independent runs exactly") {
  const data::TrialSet set = separable_set(27, 12);
  SplitPlan plan;
  plan.k = 3;
  plan.seed = 13;
  PipelineConfig base = small_config();
  const GridResult grid = aggregator_grid(set, base, plan);

  REQUIRE(grid.accuracy.rows() == agg::kAggregatorCount);
  REQUIRE(grid.accuracy.cols() == agg::kAggregatorCount);
  CHECK(grid.accuracy.minCoeff() >= 0.0);
  CHECK(grid.accuracy.maxCoeff() <= 1.0);

  const auto& catalog = agg::aggregator_catalog();
  for (const auto& [fi, ci] : std::vector<std::pair<int, int>>{
           {0, 0}, {2, 7}, {13, 16}, {9, 9}}) {
    PipelineConfig config = base;
    config.fusion.freq_agg = catalog[static_cast<std::size_t>(fi)];
    config.fusion.class_agg = catalog[static_cast<std::size_t>(ci)];
    const CvResult direct = run_cv(set, config, plan);
    CHECK(grid.accuracy(fi, ci) == direct.mean);
  }

  // The best cell dominates any particular cell.
  CHECK(grid.best_accuracy >= grid.accuracy(0, 0));
  CHECK(grid.best_accuracy == grid.accuracy.maxCoeff());

  const std::string csv = grid_to_csv(grid);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == agg::kAggregatorCount + 1);
  CHECK(csv.find("freq_agg,mean,median,choquet") == 0);
}

TEST_CASE("subset pair counts") {
  CHECK(subset_pair_count(2, 2) == 9);
  CHECK(subset_pair_count(6, 5) == 1953);
  CHECK(subset_pair_count(1, 1) == 1);
  CHECK(subset_pair_count(3, 3) == 49);
}

TEST_CASE("search ranks configurations and includes the full config") {
  const data::TrialSet set = separable_set(29, 12);
  SplitPlan plan;
  plan.k = 3;
  plan.seed = 17;
  PipelineConfig base = small_config();

  SearchOptions options;
  options.band_universe = {BandId::Alpha, BandId::Beta, BandId::All};
  options.classifier_universe = {ClassifierId::Lda, ClassifierId::Qda,
                                 ClassifierId::Knn};
  options.agg_pairs = {{AggregatorId::Mean, AggregatorId::Mean},
                       {AggregatorId::Choquet, AggregatorId::Min}};
  options.top_n = 0;  // keep everything

  const auto entries = oemf_search(set, plan, base, options);
  REQUIRE(entries.size() ==
          static_cast<std::size_t>(subset_pair_count(3, 3)) * 2);

  for (std::size_t i = 1; i < entries.size(); ++i) {
    CHECK(entries[i - 1].mean_accuracy >= entries[i].mean_accuracy);
    if (entries[i - 1].mean_accuracy == entries[i].mean_accuracy) {
      // Tie-break: fewer classifiers first, then fewer bands.
      const auto& a = entries[i - 1];
      const auto& b = entries[i];
      const bool ordered =
          a.classifiers.size() < b.classifiers.size() ||
          (a.classifiers.size() == b.classifiers.size() &&
           a.bands.size() <= b.bands.size());
      CHECK(ordered);
    }
  }

  // The full configuration with mean/mean is part of the universe; the top
  // entry can only match or beat it.
  PipelineConfig full = base;
  full.fusion.bands = options.band_universe;
  full.fusion.classifiers = options.classifier_universe;
  const CvResult direct = run_cv(set, full, plan);
  CHECK(entries.front().mean_accuracy >= direct.mean);

  // And the matching search entry agrees with the direct run exactly.
  bool found = false;
  for (const SearchEntry& e : entries) {
    if (e.bands == full.fusion.bands &&
        e.classifiers == full.fusion.classifiers &&
        e.freq_agg == AggregatorId::Mean && e.class_agg == AggregatorId::Mean) {
      found = true;
      CHECK(e.mean_accuracy == direct.mean);
      CHECK(e.per_split == direct.per_split);
    }
  }
  CHECK(found);
}

TEST_CASE("search output is identical across thread counts") {
  const data::TrialSet set = separable_set(31, 12);
  SplitPlan plan;
  plan.k = 3;
  plan.seed = 19;

  SearchOptions options;
  options.band_universe = {BandId::Alpha, BandId::Beta};
  options.classifier_universe = {ClassifierId::Lda, ClassifierId::Knn};
  options.top_n = 0;

  PipelineConfig serial = small_config();
  serial.threads = 1;
  PipelineConfig parallel = small_config();
  parallel.threads = 4;

  const std::string csv_serial =
      search_to_csv(oemf_search(set, plan, serial, options));
  const std::string csv_parallel =
      search_to_csv(oemf_search(set, plan, parallel, options));
  CHECK(csv_serial == csv_parallel);
  CHECK(csv_serial.find("rank,bands,classifiers") == 0);
}

TEST_CASE("no training data leaks into the test view") {
  // Training trials carry no class information; test trials are perfectly
  // separable. A leak-free pipeline cannot learn the test association, so
  // accuracy stays near chance over repeated generator seeds.
  double total_acc = 0.0;
  const int n_seeds = 10;
  for (int seed = 0; seed < n_seeds; ++seed) {
    Rng rng(1000 + static_cast<std::uint64_t>(seed));
    data::TrialSet set = noise_set(rng, 150);
    // Test-only marker: strong 10 Hz rhythm on class-0 trials.
    for (int t = 100; t < 150; ++t) {
      if (set.trials[static_cast<std::size_t>(t)].label != 0) continue;
      for (int c = 0; c < 4; ++c) {
        for (int i = 0; i < 250; ++i) {
          set.trials[static_cast<std::size_t>(t)].samples(c, i) +=
              5.0 * std::sin(2.0 * M_PI * 10.0 * i / 250.0);
        }
      }
    }

    PipelineConfig config = small_config();
    config.fusion.bands = {BandId::Alpha};
    config.fusion.classifiers = {ClassifierId::Lda};
    const BandSeries series = precompute_series(
        set, config.fusion.bands, config.window, config.differentiate, 1);

    Split split;
    for (int i = 0; i < 100; ++i) split.train.push_back(i);
    for (int i = 100; i < 150; ++i) split.test.push_back(i);
    const SplitScores scored =
        score_split(series, config.fusion.classifiers, split, config, 0);

    int hits = 0;
    for (Eigen::Index row = 0; row < scored.scores[0].rows(); ++row) {
      Eigen::Index best = 0;
      scored.scores[0].row(row).maxCoeff(&best);
      hits += static_cast<int>(best) ==
              scored.test_labels[static_cast<std::size_t>(row)];
    }
    const double acc = static_cast<double>(hits) /
                       static_cast<double>(scored.test_labels.size());
    CHECK(acc < 1.0);
    total_acc += acc;
  }
  CHECK(total_acc / n_seeds <= 0.8);
}

TEST_CASE("swapping train and test refits the models") {
  Rng rng(757);
  const data::TrialSet set = noise_set(rng, 150);
  PipelineConfig config = small_config();
  config.fusion.bands = {BandId::Alpha};
  config.fusion.classifiers = {ClassifierId::Lda};
  const BandSeries series = precompute_series(
      set, config.fusion.bands, config.window, config.differentiate, 1);

  Split forward, backward;
  for (int i = 0; i < 75; ++i) forward.train.push_back(i);
  for (int i = 75; i < 150; ++i) forward.test.push_back(i);
  backward.train = forward.test;
  backward.test = forward.train;

  const SplitScores a =
      score_split(series, config.fusion.classifiers, forward, config, 0);
  const SplitScores b =
      score_split(series, config.fusion.classifiers, backward, config, 0);
  CHECK(a.scores[0] != b.scores[0]);
}

TEST_CASE("fitted pipeline applies to fresh trials") {
  const data::TrialSet set = separable_set(41, 16);
  PipelineConfig config = small_config();
  const data::PipelineModels models = fit_full(set, config);
  REQUIRE(models.bands.size() == 2);

  const data::TrialSet fresh = separable_set(42, 4);
  int hits = 0;
  for (const data::Trial& trial : fresh.trials) {
    const auto result = apply_pipeline(models, trial.samples, fresh.fs);
    hits += result.label == trial.label;
  }
  CHECK(static_cast<double>(hits) / fresh.trials.size() >= 0.9);

  CHECK_THROWS_AS(apply_pipeline(models, Matrix::Zero(7, 500), 250.0), Error);
}

}  // TEST_SUITE
