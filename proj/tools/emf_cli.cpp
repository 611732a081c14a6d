// Command-line surface for the fusion pipeline: dataset synthesis, cross-
// validated evaluation, the aggregator-pair grid, the exhaustive
// configuration search and the ITR / Q-statistic metrics.
//
// Exit codes: 0 success, 1 usage error, 2 data/processing error.

#include "CLI11.hpp"
#include "emf/aggregation.hpp"
#include "emf/data.hpp"
#include "emf/eval.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

// Raised while turning flags into configurations; maps to exit code 1,
// whereas errors past that point are data errors (exit code 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename Fn>
auto configure(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const emf::Error& e) {
    throw UsageError(e.what());
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

std::vector<emf::dsp::BandId> parse_bands(const std::string& text) {
  std::vector<emf::dsp::BandId> bands;
  for (const std::string& token : split_list(text)) {
    bands.push_back(emf::dsp::band_from_token(token));
  }
  return bands;
}

std::vector<emf::classify::ClassifierId> parse_classifiers(
    const std::string& text) {
  std::vector<emf::classify::ClassifierId> ids;
  for (const std::string& token : split_list(text)) {
    ids.push_back(emf::classify::classifier_from_token(token));
  }
  return ids;
}

std::vector<emf::agg::AggregatorId> parse_aggregators(const std::string& text) {
  std::vector<emf::agg::AggregatorId> ids;
  if (text == "all") {
    for (auto id : emf::agg::aggregator_catalog()) ids.push_back(id);
    return ids;
  }
  for (const std::string& token : split_list(text)) {
    ids.push_back(emf::agg::aggregator_from_token(token));
  }
  return ids;
}

// Options shared by evaluate / grid / search.
struct PipelineArgs {
  std::string data_dir;
  std::string bands = "delta,theta,alpha,beta,smr,all";
  std::string classifiers = "lda,qda,knn,svm,gp";
  int window = 50;
  int step = 5;
  bool no_diff = false;
  std::string csp_components = "3,4,6,15,3,25";
  int folds = 5;
  int holdout_reps = 0;
  double train_frac = 0.5;
  std::uint64_t seed = 1;
  int threads = 0;
};

void add_pipeline_options(CLI::App* cmd, PipelineArgs& args) {
  cmd->add_option("--data", args.data_dir, "Dataset directory (manifest.json)")
      ->required();
  cmd->add_option("--bands", args.bands,
                  "Comma list of wave bands (delta 1-3, theta 4-7, alpha 8-13, "
                  "beta 14-30, smr 13-15, all 1-30 Hz)")
      ->capture_default_str();
  cmd->add_option("--classifiers", args.classifiers,
                  "Comma list of classifier types")
      ->capture_default_str();
  cmd->add_option("--window", args.window, "Moving window length in samples")
      ->capture_default_str();
  cmd->add_option("--step", args.step,
                  "Window step in samples (50/5 = 45 samples of overlap)")
      ->capture_default_str();
  cmd->add_flag("--no-diff", args.no_diff,
                "Skip the band-power differentiation step");
  cmd->add_option("--csp-components", args.csp_components,
                  "Spatial filters per band, catalog order "
                  "(delta,theta,alpha,beta,smr,all); capped at channel count")
      ->capture_default_str();
  cmd->add_option("--folds", args.folds, "Stratified k-fold count")
      ->capture_default_str();
  cmd->add_option("--holdout-reps", args.holdout_reps,
                  "Use repeated stratified holdout with this many repetitions "
                  "instead of k-fold")
      ->capture_default_str();
  cmd->add_option("--train-frac", args.train_frac,
                  "Training fraction for repeated holdout")
      ->capture_default_str();
  cmd->add_option("--seed", args.seed, "Seed for splits and classifier fits")
      ->capture_default_str();
  cmd->add_option("--threads", args.threads,
                  "Worker threads (0 = hardware count)")
      ->capture_default_str();
}

emf::eval::PipelineConfig build_pipeline_config(const PipelineArgs& args) {
  emf::eval::PipelineConfig config;
  config.fusion.bands = parse_bands(args.bands);
  config.fusion.classifiers = parse_classifiers(args.classifiers);
  config.window.length = args.window;
  config.window.step = args.step;
  config.differentiate = !args.no_diff;
  config.seed = args.seed;
  config.threads = args.threads;

  const auto counts = split_list(args.csp_components);
  if (counts.size() != emf::dsp::kBandCount) {
    emf::raise(emf::ErrorCode::InvalidValue,
               "--csp-components needs 6 comma-separated counts");
  }
  for (std::size_t i = 0; i < counts.size(); ++i) {
    try {
      std::size_t used = 0;
      config.csp_components[i] = std::stoi(counts[i], &used);
      if (used != counts[i].size()) throw std::invalid_argument(counts[i]);
    } catch (const std::exception&) {
      emf::raise(emf::ErrorCode::InvalidValue,
                 "--csp-components: '" + counts[i] + "' is not a count");
    }
  }
  return config;
}

emf::eval::SplitPlan build_plan(const PipelineArgs& args) {
  emf::eval::SplitPlan plan;
  plan.seed = args.seed;
  if (args.holdout_reps > 0) {
    plan.kind = emf::eval::SplitPlan::Kind::RepeatedHoldout;
    plan.reps = args.holdout_reps;
    plan.train_frac = args.train_frac;
  } else {
    plan.kind = emf::eval::SplitPlan::Kind::KFold;
    plan.k = args.folds;
  }
  return plan;
}

json plan_to_json(const emf::eval::SplitPlan& plan) {
  json j;
  if (plan.kind == emf::eval::SplitPlan::Kind::KFold) {
    j["kind"] = "kfold";
    j["k"] = plan.k;
  } else {
    j["kind"] = "repeated_holdout";
    j["reps"] = plan.reps;
    j["train_frac"] = plan.train_frac;
  }
  j["seed"] = plan.seed;
  return j;
}

json config_to_json(const emf::eval::PipelineConfig& config,
                    const std::string& data_dir) {
  json j;
  j["data"] = data_dir;
  j["fusion"] = json::parse(emf::fusion::config_to_json(config.fusion));
  j["window"] = config.window.length;
  j["step"] = config.window.step;
  j["differentiate"] = config.differentiate;
  j["csp_components"] = config.csp_components;
  j["seed"] = config.seed;
  j["threads"] = config.threads;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    emf::raise(emf::ErrorCode::MissingFile, "cannot write " + path);
  }
  out << text;
}

json load_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    emf::raise(emf::ErrorCode::MissingFile, "cannot open results " + path);
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    emf::raise(emf::ErrorCode::InvalidValue,
               path + ": " + std::string(e.what()));
  }
  return j;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  int trials = 200;
  std::uint64_t seed = 1;
  std::string out_dir;
  double fs = 250.0;
  double duration = 2.0;
  double snr = 4.0;
  double erd_depth = 0.8;
  double drift = 0.0;
};

int run_synth(const SynthArgs& args) {
  if (args.trials < 8 || args.trials % 2 != 0) {
    std::cerr << "error: --trials must be an even number >= 8\n";
    return kExitUsage;
  }
  emf::data::SynthSpec spec;
  spec.trials_per_class = args.trials / 2;
  spec.seed = args.seed;
  spec.fs = args.fs;
  spec.duration_s = args.duration;
  spec.snr = args.snr;
  spec.erd_depth = args.erd_depth;
  spec.drift = args.drift;
  const emf::data::TrialSet set =
      configure([&] { return emf::data::generate_synthetic(spec); });
  emf::data::save_dataset(set, args.out_dir);
  std::cout << "wrote " << set.trials.size() << " trials ("
            << set.channels.size() << " channels, fs " << set.fs << " Hz) to "
            << args.out_dir << "\n";
  return kExitOk;
}

struct EvaluateArgs {
  PipelineArgs pipeline;
  std::string mode = "emf";
  std::string freq_agg = "mean";
  std::string class_agg = "mean";
  std::string out_json;
  std::string bundle_path;
};

int run_evaluate(const EvaluateArgs& args) {
  const emf::eval::PipelineConfig config = configure([&] {
    emf::eval::PipelineConfig c = build_pipeline_config(args.pipeline);
    c.fusion.mode = emf::fusion::mode_from_token(args.mode);
    c.fusion.freq_agg = emf::agg::aggregator_from_token(args.freq_agg);
    c.fusion.class_agg = emf::agg::aggregator_from_token(args.class_agg);
    emf::fusion::validate(c.fusion);
    return c;
  });
  const emf::eval::SplitPlan plan = build_plan(args.pipeline);

  const emf::data::TrialSet set =
      emf::data::load_dataset(args.pipeline.data_dir);
  const emf::eval::CvResult result = emf::eval::run_cv(set, config, plan);

  std::printf("accuracy %.4f ± %.4f  (%zu splits, %zu trials)\n", result.mean,
              result.stddev, result.per_split.size(), set.trials.size());
  if (result.zero_fallbacks > 0) {
    std::printf("zero-score fallbacks: %d\n", result.zero_fallbacks);
  }

  if (!args.out_json.empty()) {
    json j;
    j["format"] = 1;
    j["config"] = config_to_json(config, args.pipeline.data_dir);
    j["plan"] = plan_to_json(plan);
    j["classes"] = set.classes;
    j["n_classes"] = set.n_classes();
    j["per_split_accuracy"] = result.per_split;
    j["mean_accuracy"] = result.mean;
    j["std_accuracy"] = result.stddev;
    std::size_t observations = 0;
    if (!result.member_correctness.empty()) {
      observations = result.member_correctness.front().size();
    }
    j["observations"] = observations;
    j["zero_score_fallbacks"] = result.zero_fallbacks;
    j["members"] = json::array();
    for (std::size_t m = 0; m < result.members.size(); ++m) {
      json member;
      member["band"] = std::string(emf::dsp::to_token(result.members[m].first));
      member["classifier"] =
          std::string(emf::classify::to_token(result.members[m].second));
      std::vector<int> correct(result.member_correctness[m].begin(),
                               result.member_correctness[m].end());
      member["correct"] = correct;
      j["members"].push_back(std::move(member));
    }
    write_text(args.out_json, j.dump(2) + "\n");
    std::cout << "results written to " << args.out_json << "\n";
  }

  if (!args.bundle_path.empty()) {
    const emf::data::PipelineModels models = emf::eval::fit_full(set, config);
    emf::data::save_bundle(models, args.bundle_path);
    std::cout << "full-data pipeline bundle written to " << args.bundle_path
              << "\n";
  }
  return kExitOk;
}

struct GridArgs {
  PipelineArgs pipeline;
  std::string out_csv = "grid.csv";
  std::string out_json;
};

int run_grid(const GridArgs& args) {
  const emf::eval::PipelineConfig config = configure([&] {
    emf::eval::PipelineConfig c = build_pipeline_config(args.pipeline);
    c.fusion.mode = emf::fusion::FusionMode::Emf;
    emf::fusion::validate(c.fusion);
    return c;
  });
  const emf::eval::SplitPlan plan = build_plan(args.pipeline);

  const emf::data::TrialSet set =
      emf::data::load_dataset(args.pipeline.data_dir);
  const emf::eval::GridResult grid =
      emf::eval::aggregator_grid(set, config, plan);

  write_text(args.out_csv, emf::eval::grid_to_csv(grid));
  std::printf("best pair: freq=%s class=%s accuracy %.4f\n",
              std::string(emf::agg::to_token(grid.best_freq)).c_str(),
              std::string(emf::agg::to_token(grid.best_class)).c_str(),
              grid.best_accuracy);
  std::cout << "grid written to " << args.out_csv << "\n";

  if (!args.out_json.empty()) {
    json j;
    j["format"] = 1;
    j["config"] = config_to_json(config, args.pipeline.data_dir);
    j["plan"] = plan_to_json(plan);
    json rows = json::array();
    for (int fi = 0; fi < emf::agg::kAggregatorCount; ++fi) {
      json row = json::array();
      for (int ci = 0; ci < emf::agg::kAggregatorCount; ++ci) {
        row.push_back(grid.accuracy(fi, ci));
      }
      rows.push_back(std::move(row));
    }
    j["accuracy"] = std::move(rows);
    j["best"] = {{"freq_agg", std::string(emf::agg::to_token(grid.best_freq))},
                 {"class_agg", std::string(emf::agg::to_token(grid.best_class))},
                 {"accuracy", grid.best_accuracy}};
    write_text(args.out_json, j.dump(2) + "\n");
  }
  return kExitOk;
}

struct SearchArgs {
  PipelineArgs pipeline;
  std::string aggs = "all";
  int top = 10;
  std::string out_csv = "ranked.csv";
  std::string out_json;
};

int run_search(const SearchArgs& args) {
  const emf::eval::PipelineConfig config = configure([&] {
    emf::eval::PipelineConfig c = build_pipeline_config(args.pipeline);
    c.fusion.mode = emf::fusion::FusionMode::Emf;
    return c;
  });
  const emf::eval::SplitPlan plan = build_plan(args.pipeline);

  emf::eval::SearchOptions options;
  options.band_universe = config.fusion.bands;
  options.classifier_universe = config.fusion.classifiers;
  options.top_n = args.top;
  const auto agg_ids = configure([&] { return parse_aggregators(args.aggs); });
  for (auto f : agg_ids) {
    for (auto c : agg_ids) options.agg_pairs.emplace_back(f, c);
  }

  const emf::data::TrialSet set =
      emf::data::load_dataset(args.pipeline.data_dir);
  const auto entries = emf::eval::oemf_search(set, plan, config, options);

  const long long subsets =
      emf::eval::subset_pair_count(static_cast<int>(options.band_universe.size()),
                                   static_cast<int>(options.classifier_universe.size()));
  std::printf("searched %lld band/classifier subset pairs x %zu aggregator pairs\n",
              subsets, options.agg_pairs.size());
  if (!entries.empty()) {
    const auto& best = entries.front();
    std::ostringstream bands, clfs;
    for (std::size_t i = 0; i < best.bands.size(); ++i) {
      bands << (i ? "+" : "") << emf::dsp::to_token(best.bands[i]);
    }
    for (std::size_t i = 0; i < best.classifiers.size(); ++i) {
      clfs << (i ? "+" : "") << emf::classify::to_token(best.classifiers[i]);
    }
    std::printf("top config: bands=%s classifiers=%s freq=%s class=%s accuracy %.4f\n",
                bands.str().c_str(), clfs.str().c_str(),
                std::string(emf::agg::to_token(best.freq_agg)).c_str(),
                std::string(emf::agg::to_token(best.class_agg)).c_str(),
                best.mean_accuracy);
  }
  write_text(args.out_csv, emf::eval::search_to_csv(entries));
  std::cout << "ranked table written to " << args.out_csv << "\n";

  if (!args.out_json.empty()) {
    json j;
    j["format"] = 1;
    j["config"] = config_to_json(config, args.pipeline.data_dir);
    j["plan"] = plan_to_json(plan);
    j["subset_pairs"] = subsets;
    j["aggregator_pairs"] = options.agg_pairs.size();
    j["entries"] = json::array();
    for (const auto& e : entries) {
      json je;
      je["bands"] = json::array();
      for (auto b : e.bands) je["bands"].push_back(std::string(emf::dsp::to_token(b)));
      je["classifiers"] = json::array();
      for (auto c : e.classifiers) {
        je["classifiers"].push_back(std::string(emf::classify::to_token(c)));
      }
      je["freq_agg"] = std::string(emf::agg::to_token(e.freq_agg));
      je["class_agg"] = std::string(emf::agg::to_token(e.class_agg));
      je["mean_accuracy"] = e.mean_accuracy;
      je["per_split_accuracy"] = e.per_split;
      j["entries"].push_back(std::move(je));
    }
    write_text(args.out_json, j.dump(2) + "\n");
  }
  return kExitOk;
}

struct ItrArgs {
  std::string results_path;
  int classes = 0;
  double accuracy = -1.0;
  double observations = 0.0;
  double minutes = 0.0;
  double trial_seconds = 0.0;
};

int run_itr(const ItrArgs& args) {
  emf::eval::ItrInput input;
  input.n_classes = args.classes;
  input.accuracy = args.accuracy;
  input.observations = args.observations;

  if (!args.results_path.empty()) {
    const json j = load_results(args.results_path);
    if (input.n_classes <= 0) input.n_classes = j.at("n_classes").get<int>();
    if (input.accuracy < 0.0) {
      input.accuracy = j.at("mean_accuracy").get<double>();
    }
    if (input.observations <= 0.0) {
      input.observations = j.at("observations").get<double>();
    }
  }
  input.minutes = args.minutes;
  if (input.minutes <= 0.0 && args.trial_seconds > 0.0) {
    input.minutes = input.observations * args.trial_seconds / 60.0;
  }
  if (input.minutes <= 0.0) {
    std::cerr << "error: provide --minutes or --trial-seconds\n";
    return kExitUsage;
  }

  const emf::eval::ItrResult result = configure([&] { return emf::eval::itr(input); });
  std::printf("B = %.4f bits/trial\n", result.bits_per_trial);
  std::printf("ITR = %.4f bits/min  (N=%d, P=%.4f, S=%.0f, T=%.3f min)\n",
              result.bits_per_minute, input.n_classes, input.accuracy,
              input.observations, input.minutes);
  return kExitOk;
}

struct QstatArgs {
  std::string results_path;
};

int run_qstat(const QstatArgs& args) {
  const json j = load_results(args.results_path);
  std::vector<std::vector<char>> correctness;
  for (const auto& member : j.at("members")) {
    const auto bits = member.at("correct").get<std::vector<int>>();
    correctness.emplace_back(bits.begin(), bits.end());
  }
  const double q = emf::eval::q_statistic(correctness);
  std::printf("Q-statistic = %.4f over %zu base classifiers\n", q,
              correctness.size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motor-imagery EEG fusion pipeline: band power, CSP features, "
               "a five-classifier ensemble and two-phase aggregation fusion"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand(
      "synth", "Generate a synthetic left/right motor-imagery dataset");
  synth->add_option("--trials", synth_args.trials,
                    "Total trial count (half per class)")
      ->capture_default_str();
  synth->add_option("--seed", synth_args.seed, "Generator seed")
      ->capture_default_str();
  synth->add_option("--out", synth_args.out_dir, "Output directory")->required();
  synth->add_option("--fs", synth_args.fs, "Sampling rate in Hz")
      ->capture_default_str();
  synth->add_option("--duration", synth_args.duration, "Trial length in seconds")
      ->capture_default_str();
  synth->add_option("--snr", synth_args.snr, "Oscillation-to-noise power ratio")
      ->capture_default_str();
  synth->add_option("--erd-depth", synth_args.erd_depth,
                    "Contralateral amplitude attenuation in [0, 1]")
      ->capture_default_str();
  synth->add_option("--drift", synth_args.drift,
                    "Max random linear power-ramp slope per trial (0 = off)")
      ->capture_default_str();

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand(
      "evaluate", "Cross-validate one fusion configuration");
  add_pipeline_options(evaluate, eval_args.pipeline);
  evaluate->add_option("--mode", eval_args.mode,
                       "Fusion mode: traditional | mff | emf")
      ->capture_default_str();
  evaluate->add_option("--freq-agg", eval_args.freq_agg,
                       "Frequency-phase aggregator")
      ->capture_default_str();
  evaluate->add_option("--class-agg", eval_args.class_agg,
                       "Classifier-phase aggregator")
      ->capture_default_str();
  evaluate->add_option("--out", eval_args.out_json,
                       "Write full results JSON here");
  evaluate->add_option("--bundle", eval_args.bundle_path,
                       "Fit on all trials and save the model bundle here");

  GridArgs grid_args;
  auto* grid = app.add_subcommand(
      "grid", "Accuracy of every frequency/classifier aggregator pair (17x17)");
  add_pipeline_options(grid, grid_args.pipeline);
  grid->add_option("--out", grid_args.out_csv, "Output CSV path")
      ->capture_default_str();
  grid->add_option("--json", grid_args.out_json, "Optional JSON output path");

  SearchArgs search_args;
  auto* search = app.add_subcommand(
      "search",
      "Exhaustive search over band subsets x classifier subsets x aggregator "
      "pairs");
  add_pipeline_options(search, search_args.pipeline);
  search->add_option("--aggs", search_args.aggs,
                     "Aggregators to pair in both phases (comma list or 'all')")
      ->capture_default_str();
  search->add_option("--top", search_args.top,
                     "Entries to keep in the ranked table (0 = all)")
      ->capture_default_str();
  search->add_option("--out", search_args.out_csv, "Output CSV path")
      ->capture_default_str();
  search->add_option("--json", search_args.out_json, "Optional JSON output path");

  ItrArgs itr_args;
  auto* itr_cmd = app.add_subcommand(
      "itr", "Information transfer rate from a results JSON or explicit values");
  itr_cmd->add_option("--results", itr_args.results_path,
                      "results.json from 'evaluate'");
  itr_cmd->add_option("--classes", itr_args.classes, "Number of target classes");
  itr_cmd->add_option("--accuracy", itr_args.accuracy, "Accuracy in [0, 1]");
  itr_cmd->add_option("--observations", itr_args.observations,
                      "Number of decisions");
  itr_cmd->add_option("--minutes", itr_args.minutes, "Total time in minutes");
  itr_cmd->add_option("--trial-seconds", itr_args.trial_seconds,
                      "Seconds per decision (alternative to --minutes)");

  QstatArgs qstat_args;
  auto* qstat = app.add_subcommand(
      "qstat", "Mean pairwise Q-statistic of the base classifiers");
  qstat->add_option("--results", qstat_args.results_path,
                    "results.json from 'evaluate'")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    std::cerr << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (synth->parsed()) return run_synth(synth_args);
    if (evaluate->parsed()) return run_evaluate(eval_args);
    if (grid->parsed()) return run_grid(grid_args);
    if (search->parsed()) return run_search(search_args);
    if (itr_cmd->parsed()) return run_itr(itr_args);
    if (qstat->parsed()) return run_qstat(qstat_args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const emf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
