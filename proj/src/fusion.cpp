#include "emf/fusion.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace emf::fusion {

namespace {

constexpr double kScoreSumTol = 1e-9;

void validate_tensor(const ScoreTensor& tensor) {
  if (tensor.bands.empty() || tensor.classifiers.empty()) {
    raise(ErrorCode::InvalidValue, "score tensor has empty axes");
  }
  if (tensor.n_classes < 2) {
    raise(ErrorCode::InvalidValue, "score tensor needs >= 2 classes");
  }
  if (tensor.scores.size() != tensor.bands.size()) {
    raise(ErrorCode::DimensionMismatch, "tensor has one matrix per band");
  }
  for (const Matrix& m : tensor.scores) {
    if (m.rows() != static_cast<Eigen::Index>(tensor.classifiers.size()) ||
        m.cols() != tensor.n_classes) {
      raise(ErrorCode::DimensionMismatch, "tensor slice shape mismatch");
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const double sum = m.row(r).sum();
      if (std::abs(sum - 1.0) > kScoreSumTol || m.row(r).minCoeff() < 0.0) {
        raise(ErrorCode::InvalidValue,
              "tensor row is not a valid score vector (sum " +
                  std::to_string(sum) + ")");
      }
    }
  }
}

template <typename T, typename ToToken>
std::vector<std::size_t> subset_indices(const std::vector<T>& subset,
                                        const std::vector<T>& axis,
                                        ToToken to_token_fn) {
  std::vector<std::size_t> indices;
  indices.reserve(subset.size());
  for (const T& wanted : subset) {
    const auto it = std::find(axis.begin(), axis.end(), wanted);
    if (it == axis.end()) {
      raise(ErrorCode::InvalidValue,
            "config references '" + std::string(to_token_fn(wanted)) +
                "' absent from the score tensor");
    }
    indices.push_back(static_cast<std::size_t>(it - axis.begin()));
  }
  return indices;
}

}  // namespace

std::string_view to_token(FusionMode mode) {
  switch (mode) {
    case FusionMode::Traditional: return "traditional";
    case FusionMode::Mff: return "mff";
    case FusionMode::Emf: return "emf";
  }
  return "?";
}

FusionMode mode_from_token(std::string_view token) {
  for (FusionMode mode :
       {FusionMode::Traditional, FusionMode::Mff, FusionMode::Emf}) {
    if (to_token(mode) == token) return mode;
  }
  raise(ErrorCode::InvalidValue,
        "unknown fusion mode '" + std::string(token) + "'");
}

void validate(const FusionConfig& config) {
  if (config.bands.empty()) raise(ErrorCode::InvalidValue, "empty band subset");
  if (config.classifiers.empty()) {
    raise(ErrorCode::InvalidValue, "empty classifier subset");
  }
  if (std::set<dsp::BandId>(config.bands.begin(), config.bands.end()).size() !=
      config.bands.size()) {
    raise(ErrorCode::InvalidValue, "duplicate band in config");
  }
  if (std::set<classify::ClassifierId>(config.classifiers.begin(),
                                       config.classifiers.end())
          .size() != config.classifiers.size()) {
    raise(ErrorCode::InvalidValue, "duplicate classifier in config");
  }
  if (config.mode == FusionMode::Mff && config.freq_agg != config.class_agg) {
    raise(ErrorCode::InvalidValue, "mff requires equal aggregators");
  }
  if (config.mode == FusionMode::Traditional && config.classifiers.size() != 1) {
    raise(ErrorCode::InvalidValue,
          "traditional mode uses a single classifier type");
  }
}

std::string config_to_json(const FusionConfig& config) {
  nlohmann::json j;
  j["mode"] = std::string(to_token(config.mode));
  j["bands"] = nlohmann::json::array();
  for (dsp::BandId b : config.bands) {
    j["bands"].push_back(std::string(dsp::to_token(b)));
  }
  j["classifiers"] = nlohmann::json::array();
  for (classify::ClassifierId c : config.classifiers) {
    j["classifiers"].push_back(std::string(classify::to_token(c)));
  }
  j["freq_agg"] = std::string(agg::to_token(config.freq_agg));
  j["class_agg"] = std::string(agg::to_token(config.class_agg));
  return j.dump();
}

FusionConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::InvalidValue, std::string("bad fusion config: ") + e.what());
  }
  FusionConfig config;
  try {
    config.mode = mode_from_token(j.at("mode").get<std::string>());
    for (const auto& b : j.at("bands")) {
      config.bands.push_back(dsp::band_from_token(b.get<std::string>()));
    }
    for (const auto& c : j.at("classifiers")) {
      config.classifiers.push_back(
          classify::classifier_from_token(c.get<std::string>()));
    }
    config.freq_agg =
        agg::aggregator_from_token(j.at("freq_agg").get<std::string>());
    config.class_agg =
        agg::aggregator_from_token(j.at("class_agg").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::InvalidValue, std::string("bad fusion config: ") + e.what());
  }
  validate(config);
  return config;
}

Matrix frequency_phase(const ScoreTensor& tensor, agg::AggregatorId aggregator,
                       int* zero_fallbacks) {
  validate_tensor(tensor);
  const int n_bands = static_cast<int>(tensor.bands.size());
  const int n_classifiers = static_cast<int>(tensor.classifiers.size());
  if (n_bands > detail::kMaxFuseArity) {
    raise(ErrorCode::InvalidValue, "fusion arity too large");
  }
  Matrix collectives(n_classifiers, tensor.n_classes);
  double gather[detail::kMaxFuseArity];
  for (int c = 0; c < n_classifiers; ++c) {
    Vector row(tensor.n_classes);
    for (int k = 0; k < tensor.n_classes; ++k) {
      for (int b = 0; b < n_bands; ++b) {
        gather[b] = tensor.scores[static_cast<std::size_t>(b)](c, k);
      }
      row[k] = agg::aggregate(aggregator,
                              Eigen::Map<const Vector>(gather, n_bands));
    }
    if (detail::normalize_scores(row) && zero_fallbacks) ++*zero_fallbacks;
    collectives.row(c) = row;
  }
  return collectives;
}

Vector classifier_phase(const Matrix& collectives, agg::AggregatorId aggregator,
                        int* zero_fallbacks) {
  if (collectives.rows() < 1) {
    raise(ErrorCode::InvalidValue, "empty classifier subset");
  }
  if (collectives.rows() > detail::kMaxFuseArity) {
    raise(ErrorCode::InvalidValue, "fusion arity too large");
  }
  Vector final_scores(collectives.cols());
  double gather[detail::kMaxFuseArity];
  for (Eigen::Index k = 0; k < collectives.cols(); ++k) {
    for (Eigen::Index c = 0; c < collectives.rows(); ++c) {
      gather[c] = collectives(c, k);
    }
    final_scores[k] = agg::aggregate(
        aggregator,
        Eigen::Map<const Vector>(gather, static_cast<int>(collectives.rows())));
  }
  if (detail::normalize_scores(final_scores) && zero_fallbacks) {
    ++*zero_fallbacks;
  }
  return final_scores;
}

int decide(VectorRef final_scores) {
  if (final_scores.size() < 1) {
    raise(ErrorCode::InvalidValue, "empty score vector");
  }
  int best = 0;
  for (Eigen::Index k = 1; k < final_scores.size(); ++k) {
    if (final_scores[k] > final_scores[best]) best = static_cast<int>(k);
  }
  return best;
}

FuseResult fuse(const ScoreTensor& tensor, const FusionConfig& config) {
  validate(config);
  validate_tensor(tensor);
  const auto band_idx =
      subset_indices(config.bands, tensor.bands,
                     [](dsp::BandId b) { return dsp::to_token(b); });
  const auto clf_idx = subset_indices(
      config.classifiers, tensor.classifiers,
      [](classify::ClassifierId c) { return classify::to_token(c); });
  return detail::fuse_core(
      static_cast<int>(band_idx.size()), static_cast<int>(clf_idx.size()),
      tensor.n_classes, config.mode, config.freq_agg, config.class_agg,
      [&](int b, int c, int k) {
        return tensor.scores[band_idx[static_cast<std::size_t>(b)]](
            static_cast<Eigen::Index>(clf_idx[static_cast<std::size_t>(c)]), k);
      });
}

}  // namespace emf::fusion
