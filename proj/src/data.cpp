#include "emf/data.hpp"

#include "emf/rng.hpp"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace emf::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kManifestFormat = 1;
constexpr int kBundleFormat = 1;

// ---------------------------------------------------------------------------
// CSV helpers

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

bool parse_double(const std::string& text, double& out) {
  const char* begin = text.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  while (end && *end == ' ') ++end;
  return end != begin && end && *end == '\0';
}

Matrix read_trial_csv(const fs::path& file,
                      const std::vector<std::string>& channels) {
  std::ifstream in(file);
  if (!in) {
    raise(ErrorCode::MissingFile, "cannot open trial file " + file.string());
  }
  const std::size_t n_channels = channels.size();
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  bool checked_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (!checked_header) {
      checked_header = true;
      double probe;
      if (!parse_double(fields.front(), probe)) {
        // Header row: must name the manifest channels in order.
        if (fields.size() != n_channels ||
            !std::equal(fields.begin(), fields.end(), channels.begin())) {
          raise(ErrorCode::RaggedData,
                file.string() +
                    ": header row does not match the manifest channels");
        }
        continue;
      }
    }
    if (fields.size() != n_channels) {
      raise(ErrorCode::RaggedData,
            file.string() + ": row " + std::to_string(line_no) + " has " +
                std::to_string(fields.size()) + " columns, expected " +
                std::to_string(n_channels));
    }
    std::vector<double> row(n_channels);
    for (std::size_t c = 0; c < n_channels; ++c) {
      if (!parse_double(fields[c], row[c])) {
        raise(ErrorCode::RaggedData, file.string() + ": row " +
                                         std::to_string(line_no) +
                                         " has a non-numeric field");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    raise(ErrorCode::RaggedData, file.string() + ": no samples");
  }
  Matrix samples(static_cast<Eigen::Index>(n_channels),
                 static_cast<Eigen::Index>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t c = 0; c < n_channels; ++c) {
      samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) =
          rows[t][c];
    }
  }
  return samples;
}

void write_trial_csv(const fs::path& file, const Trial& trial,
                     const std::vector<std::string>& channels) {
  std::ofstream out(file);
  if (!out) raise(ErrorCode::MissingFile, "cannot write " + file.string());
  for (std::size_t c = 0; c < channels.size(); ++c) {
    out << (c ? "," : "") << channels[c];
  }
  out << "\n";
  for (Eigen::Index t = 0; t < trial.samples.cols(); ++t) {
    for (Eigen::Index c = 0; c < trial.samples.rows(); ++c) {
      out << (c ? "," : "") << format_double(trial.samples(c, t));
    }
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// JSON helpers for Eigen types

json matrix_to_json(const Matrix& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    raise(ErrorCode::CorruptBundle, "matrix payload size mismatch");
  }
  Matrix m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[i++].get<double>();
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json data = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) data.push_back(v[i]);
  return data;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index i = 0;
  for (const auto& x : j) v[i++] = x.get<double>();
  return v;
}

// ---------------------------------------------------------------------------
// Classifier model (de)serialization

json model_to_json(const classify::Model& model) {
  using namespace classify;
  json j;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LdaModel>) {
          j["type"] = "lda";
          j["means"] = matrix_to_json(m.means);
          j["chol"] = matrix_to_json(m.chol_lower);
        } else if constexpr (std::is_same_v<T, QdaModel>) {
          j["type"] = "qda";
          j["means"] = matrix_to_json(m.means);
          j["log_dets"] = vector_to_json(m.log_dets);
          j["chols"] = json::array();
          for (const Matrix& c : m.chol_lower) {
            j["chols"].push_back(matrix_to_json(c));
          }
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          j["type"] = "knn";
          j["X"] = matrix_to_json(m.X);
          j["y"] = m.y;
          j["k"] = m.k;
          j["classes"] = m.n_classes;
        } else if constexpr (std::is_same_v<T, SvmModel>) {
          j["type"] = "svm";
          j["machines"] = json::array();
          for (const SvmMachine& mac : m.machines) {
            j["machines"].push_back(json{{"w", vector_to_json(mac.w)},
                                         {"b", mac.b},
                                         {"platt_a", mac.platt_a},
                                         {"platt_b", mac.platt_b}});
          }
        } else {
          j["type"] = "gp";
          j["classes"] = m.n_classes;
          j["machines"] = json::array();
          for (const GpMachine& mac : m.machines) {
            j["machines"].push_back(json{{"X", matrix_to_json(mac.X)},
                                         {"y_sign", vector_to_json(mac.y_sign)},
                                         {"f_hat", vector_to_json(mac.f_hat)},
                                         {"length_scale", mac.length_scale},
                                         {"jitter", mac.jitter}});
          }
        }
      },
      model);
  return j;
}

classify::Model model_from_json(const json& j) {
  using namespace classify;
  const std::string type = j.at("type").get<std::string>();
  if (type == "lda") {
    LdaModel m;
    m.means = matrix_from_json(j.at("means"));
    m.chol_lower = matrix_from_json(j.at("chol"));
    return m;
  }
  if (type == "qda") {
    QdaModel m;
    m.means = matrix_from_json(j.at("means"));
    m.log_dets = vector_from_json(j.at("log_dets"));
    for (const auto& c : j.at("chols")) {
      m.chol_lower.push_back(matrix_from_json(c));
    }
    return m;
  }
  if (type == "knn") {
    KnnModel m;
    m.X = matrix_from_json(j.at("X"));
    m.y = j.at("y").get<std::vector<int>>();
    m.k = j.at("k").get<int>();
    m.n_classes = j.at("classes").get<int>();
    return m;
  }
  if (type == "svm") {
    SvmModel m;
    for (const auto& mac : j.at("machines")) {
      SvmMachine machine;
      machine.w = vector_from_json(mac.at("w"));
      machine.b = mac.at("b").get<double>();
      machine.platt_a = mac.at("platt_a").get<double>();
      machine.platt_b = mac.at("platt_b").get<double>();
      m.machines.push_back(std::move(machine));
    }
    return m;
  }
  if (type == "gp") {
    GpModel m;
    m.n_classes = j.at("classes").get<int>();
    for (const auto& mac : j.at("machines")) {
      GpMachine machine;
      machine.X = matrix_from_json(mac.at("X"));
      machine.y_sign = vector_from_json(mac.at("y_sign"));
      machine.f_hat = vector_from_json(mac.at("f_hat"));
      machine.length_scale = mac.at("length_scale").get<double>();
      machine.jitter = mac.at("jitter").get<double>();
      finalize(machine);
      m.machines.push_back(std::move(machine));
    }
    return m;
  }
  raise(ErrorCode::CorruptBundle, "unknown model type '" + type + "'");
}

json csp_to_json(const csp::CspModel& m) {
  return json{{"band", std::string(dsp::to_token(m.band))},
              {"filters", matrix_to_json(m.filters)},
              {"eigenvalues", vector_to_json(m.eigenvalues)},
              {"n_components", m.n_components},
              {"target_class", m.target_class},
              {"rest_class", m.rest_class}};
}

csp::CspModel csp_from_json(const json& j) {
  csp::CspModel m;
  m.band = dsp::band_from_token(j.at("band").get<std::string>());
  m.filters = matrix_from_json(j.at("filters"));
  m.eigenvalues = vector_from_json(j.at("eigenvalues"));
  m.n_components = j.at("n_components").get<int>();
  m.target_class = j.at("target_class").get<int>();
  m.rest_class = j.at("rest_class").get<int>();
  return m;
}

fs::path manifest_path(const std::string& path) {
  fs::path p(path);
  if (p.extension() == ".json") return p;
  return p / "manifest.json";
}

}  // namespace

void validate(const TrialSet& set) {
  if (set.channels.size() < 2) {
    raise(ErrorCode::InvalidValue, "need at least 2 channels");
  }
  if (set.fs <= 60.0) {
    raise(ErrorCode::InvalidValue,
          "sampling rate must exceed 60 Hz to resolve bands up to 30 Hz");
  }
  if (set.classes.size() < 2) {
    raise(ErrorCode::InvalidValue, "need at least 2 classes");
  }
  for (std::size_t i = 0; i < set.trials.size(); ++i) {
    const Trial& trial = set.trials[i];
    if (trial.samples.rows() != set.n_channels()) {
      raise(ErrorCode::DimensionMismatch,
            "trial " + std::to_string(i) + " has " +
                std::to_string(trial.samples.rows()) + " channels, expected " +
                std::to_string(set.n_channels()));
    }
    if (trial.samples.cols() < 50) {
      raise(ErrorCode::TooShort,
            "trial " + std::to_string(i) + " is shorter than 50 samples");
    }
    if (trial.label < 0 || trial.label >= set.n_classes()) {
      raise(ErrorCode::UnknownLabel,
            "trial " + std::to_string(i) + " label out of range");
    }
  }
}

TrialSet generate_synthetic(const SynthSpec& spec) {
  if (spec.trials_per_class < 4) {
    raise(ErrorCode::InvalidValue, "need at least 4 trials per class");
  }
  if (spec.erd_depth < 0.0 || spec.erd_depth > 1.0) {
    raise(ErrorCode::InvalidValue, "erd_depth must lie in [0, 1]");
  }
  if (spec.snr <= 0.0) raise(ErrorCode::InvalidValue, "snr must be positive");
  if (spec.drift < 0.0) raise(ErrorCode::InvalidValue, "drift must be >= 0");

  TrialSet set;
  set.name = "synthetic-mi";
  set.fs = spec.fs;
  set.channels = {"C3", "C4", "CP3", "CP4"};
  set.classes = {"left", "right"};

  const int n_samples = static_cast<int>(std::lround(spec.fs * spec.duration_s));
  if (n_samples < 50) {
    raise(ErrorCode::TooShort, "duration gives fewer than 50 samples");
  }
  const int total = 2 * spec.trials_per_class;
  const double osc_amp = std::sqrt(spec.snr);

  set.trials.reserve(static_cast<std::size_t>(total));
  for (int t = 0; t < total; ++t) {
    Trial trial;
    trial.label = t % 2;  // alternate left/right
    trial.samples.resize(4, n_samples);

    for (int c = 0; c < 4; ++c) {
      Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(t),
                          static_cast<std::uint64_t>(c)));

      // Pink noise: random-phase harmonics with amplitude 1/sqrt(f),
      // normalized to unit RMS per channel.
      Vector noise = Vector::Zero(n_samples);
      for (int k = 1; k <= n_samples / 2; ++k) {
        const double freq = k * spec.fs / n_samples;
        const double amp = 1.0 / std::sqrt(freq);
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        const double omega = 2.0 * M_PI * k / n_samples;
        for (int i = 0; i < n_samples; ++i) {
          noise[i] += amp * std::cos(omega * i + phase);
        }
      }
      const double rms = std::sqrt(noise.squaredNorm() / n_samples);
      if (rms > 0.0) noise /= rms;

      // Electrode-style drift: the background noise power of each channel
      // ramps linearly within the trial, with an independent random slope per
      // channel, so the band-power series pick up an additive linear trend
      // that differencing is meant to remove. Oscillations stay stationary.
      const double mu_phase = rng.uniform(0.0, 2.0 * M_PI);
      const double beta_phase = rng.uniform(0.0, 2.0 * M_PI);
      double slope = 0.0;
      if (spec.drift > 0.0) {
        slope = spec.drift * (0.5 + 0.5 * rng.uniform());
      }

      // Mu and beta rhythms; the hemisphere contralateral to the imagined
      // hand is attenuated (left imagery suppresses C4/CP4).
      const bool contralateral = (trial.label == 0) ? (c == 1 || c == 3)
                                                    : (c == 0 || c == 2);
      const double gain = contralateral ? (1.0 - spec.erd_depth) : 1.0;
      for (int i = 0; i < n_samples; ++i) {
        const double time = i / spec.fs;
        double background = noise[i];
        if (slope > 0.0) {
          background *= std::sqrt(1.0 + slope * i / (n_samples - 1.0));
        }
        trial.samples(c, i) =
            background +
            osc_amp * gain * (std::sin(2.0 * M_PI * 10.0 * time + mu_phase) +
                              std::sin(2.0 * M_PI * 20.0 * time + beta_phase));
      }
    }
    set.trials.push_back(std::move(trial));
  }
  validate(set);
  return set;
}

TrialSet load_dataset(const std::string& path) {
  const fs::path manifest_file = manifest_path(path);
  std::ifstream in(manifest_file);
  if (!in) {
    raise(ErrorCode::MissingFile,
          "cannot open manifest " + manifest_file.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    raise(ErrorCode::InvalidValue,
          manifest_file.string() + ": " + std::string(e.what()));
  }

  TrialSet set;
  try {
    if (j.at("format").get<int>() != kManifestFormat) {
      raise(ErrorCode::VersionMismatch, "unsupported manifest format");
    }
    set.name = j.value("name", "");
    set.fs = j.at("fs").get<double>();
    if (set.fs <= 0.0) {
      raise(ErrorCode::InvalidValue, "manifest fs must be positive");
    }
    set.channels = j.at("channels").get<std::vector<std::string>>();
    set.classes = j.at("classes").get<std::vector<std::string>>();

    const fs::path base = manifest_file.parent_path();
    for (const auto& entry : j.at("trials")) {
      const std::string file = entry.at("file").get<std::string>();
      const std::string label = entry.at("label").get<std::string>();
      const auto it = std::find(set.classes.begin(), set.classes.end(), label);
      if (it == set.classes.end()) {
        raise(ErrorCode::UnknownLabel,
              "trial file " + file + " has unknown label '" + label + "'");
      }
      Trial trial;
      trial.label = static_cast<int>(it - set.classes.begin());
      trial.samples = read_trial_csv(base / file, set.channels);
      set.trials.push_back(std::move(trial));
    }
  } catch (const json::exception& e) {
    raise(ErrorCode::InvalidValue,
          manifest_file.string() + ": " + std::string(e.what()));
  }
  validate(set);
  return set;
}

void save_dataset(const TrialSet& set, const std::string& dir) {
  validate(set);
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = kManifestFormat;
  manifest["name"] = set.name;
  manifest["fs"] = set.fs;
  manifest["channels"] = set.channels;
  manifest["classes"] = set.classes;
  manifest["trials"] = json::array();
  for (std::size_t i = 0; i < set.trials.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "trial_%05zu.csv", i);
    write_trial_csv(fs::path(dir) / name, set.trials[i], set.channels);
    manifest["trials"].push_back(json{
        {"file", name},
        {"label", set.classes[static_cast<std::size_t>(set.trials[i].label)]}});
  }
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) raise(ErrorCode::MissingFile, "cannot write manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

void save_bundle(const PipelineModels& models, const std::string& path) {
  json j;
  j["format"] = kBundleFormat;
  j["kind"] = "emf-bundle";
  j["fs"] = models.fs;
  j["channels"] = models.channels;
  j["n_classes"] = models.n_classes;
  j["window"] =
      json{{"length", models.window.length}, {"step", models.window.step}};
  j["differentiate"] = models.differentiate;
  j["config"] = json::parse(fusion::config_to_json(models.config));
  j["bands"] = json::array();
  for (const FittedBand& band : models.bands) {
    json jb;
    jb["band"] = std::string(dsp::to_token(band.band));
    jb["n_components"] = band.n_components;
    jb["spatial"] = json::array();
    for (const csp::CspModel& m : band.spatial) {
      jb["spatial"].push_back(csp_to_json(m));
    }
    jb["members"] = json::array();
    for (const auto& [id, model] : band.members) {
      json jm = model_to_json(model);
      jm["classifier"] = std::string(classify::to_token(id));
      jb["members"].push_back(std::move(jm));
    }
    j["bands"].push_back(std::move(jb));
  }
  std::ofstream out(path);
  if (!out) raise(ErrorCode::MissingFile, "cannot write bundle " + path);
  out << j.dump() << "\n";
}

PipelineModels load_bundle(const std::string& path, int expected_channels) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::MissingFile, "cannot open bundle " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    raise(ErrorCode::CorruptBundle, path + ": " + std::string(e.what()));
  }

  PipelineModels models;
  try {
    if (!j.contains("format") || !j.contains("kind") ||
        j.at("kind").get<std::string>() != "emf-bundle") {
      raise(ErrorCode::CorruptBundle, "not a pipeline bundle");
    }
    if (j.at("format").get<int>() != kBundleFormat) {
      raise(ErrorCode::VersionMismatch, "unsupported bundle format");
    }
    models.fs = j.at("fs").get<double>();
    models.channels = j.at("channels").get<int>();
    models.n_classes = j.at("n_classes").get<int>();
    models.window.length = j.at("window").at("length").get<int>();
    models.window.step = j.at("window").at("step").get<int>();
    models.differentiate = j.at("differentiate").get<bool>();
    models.config = fusion::config_from_json(j.at("config").dump());
    for (const auto& jb : j.at("bands")) {
      FittedBand band;
      band.band = dsp::band_from_token(jb.at("band").get<std::string>());
      band.n_components = jb.at("n_components").get<int>();
      for (const auto& jm : jb.at("spatial")) {
        band.spatial.push_back(csp_from_json(jm));
      }
      for (const auto& jm : jb.at("members")) {
        band.members.emplace_back(classify::classifier_from_token(
                                      jm.at("classifier").get<std::string>()),
                                  model_from_json(jm));
      }
      models.bands.push_back(std::move(band));
    }
  } catch (const json::exception& e) {
    raise(ErrorCode::CorruptBundle, path + ": " + std::string(e.what()));
  }

  if (expected_channels >= 0 && models.channels != expected_channels) {
    raise(ErrorCode::DimensionMismatch,
          "bundle was fitted on " + std::to_string(models.channels) +
              " channels, dataset has " + std::to_string(expected_channels));
  }
  return models;
}

}  // namespace emf::data
