#pragma once

#include "emf/classifiers.hpp"
#include "emf/csp.hpp"
#include "emf/dsp.hpp"
#include "emf/fusion.hpp"
#include "emf/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

// Dataset ingestion (JSON manifest + one CSV per trial), the synthetic
// motor-imagery generator used by the test fixtures, and persistence of a
// fitted pipeline.
namespace emf::data {

struct Trial {
  Matrix samples;  // channels x time
  int label = 0;
};

struct TrialSet {
  std::string name;
  double fs = 250.0;
  std::vector<std::string> channels;
  std::vector<std::string> classes;
  std::vector<Trial> trials;

  int n_classes() const { return static_cast<int>(classes.size()); }
  int n_channels() const { return static_cast<int>(channels.size()); }
};

// Channel/class bookkeeping, >= 2 channels, fs resolving every band edge up
// to 30 Hz, >= 50 samples per trial, labels in range.
void validate(const TrialSet& set);

// Synthetic left/right motor imagery: pink background noise plus 10 Hz mu
// and 20 Hz beta oscillations on C3/C4/CP3/CP4, attenuated by erd_depth on
// the hemisphere contralateral to the imagined hand. `drift`, when positive,
// multiplies each trial by a random linear power ramp of at most that slope,
// which the differentiation step is designed to remove.
struct SynthSpec {
  int trials_per_class = 100;
  double fs = 250.0;
  double duration_s = 2.0;
  double snr = 4.0;        // oscillation-to-noise power ratio
  double erd_depth = 0.8;  // fraction of amplitude removed contralaterally
  double drift = 0.0;
  std::uint64_t seed = 1;
};

TrialSet generate_synthetic(const SynthSpec& spec);

// Directory layout: <dir>/manifest.json plus one CSV per trial
// (rows = samples, columns = channels, with a channel-name header row).
TrialSet load_dataset(const std::string& path);
void save_dataset(const TrialSet& set, const std::string& dir);

// A fully fitted pipeline: per-band spatial filters plus per-(band,
// classifier) models, with everything needed to score new trials.
struct FittedBand {
  dsp::BandId band = dsp::BandId::All;
  int n_components = 0;
  std::vector<csp::CspModel> spatial;  // one model, or K for one-vs-rest
  std::vector<std::pair<classify::ClassifierId, classify::Model>> members;
};

struct PipelineModels {
  double fs = 0.0;
  int channels = 0;
  int n_classes = 0;
  dsp::WindowParams window;
  bool differentiate = true;
  fusion::FusionConfig config;
  std::vector<FittedBand> bands;
};

void save_bundle(const PipelineModels& models, const std::string& path);

// expected_channels >= 0 enforces a channel-count match at load time.
PipelineModels load_bundle(const std::string& path, int expected_channels = -1);

}  // namespace emf::data
