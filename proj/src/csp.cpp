#include "emf/csp.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace emf::csp {

namespace {

constexpr double kRidge = 1e-8;
constexpr double kVarianceFloor = 1e-12;

Matrix trial_covariance(const Matrix& series) {
  const Eigen::Index windows = series.cols();
  if (windows < 2) {
    raise(ErrorCode::TooShort,
          "covariance needs at least 2 windows per trial, got " +
              std::to_string(windows));
  }
  const Matrix centered = series.colwise() - series.rowwise().mean();
  Matrix cov = centered * centered.transpose() / static_cast<double>(windows - 1);
  const double trace = cov.trace();
  if (trace > 0.0) cov /= trace;
  return cov;
}

void fix_filter_signs(Matrix& filters) {
  for (Eigen::Index r = 0; r < filters.rows(); ++r) {
    for (Eigen::Index c = 0; c < filters.cols(); ++c) {
      if (std::abs(filters(r, c)) > 1e-12) {
        if (filters(r, c) < 0.0) filters.row(r) = -filters.row(r);
        break;
      }
    }
  }
}

CspModel fit_binary(const std::vector<Matrix>& series,
                    const std::vector<int>& labels, int class_a, int class_b,
                    dsp::BandId band, int n_components, bool one_vs_rest) {
  if (n_components < 1) {
    raise(ErrorCode::InvalidValue, "n_components must be >= 1");
  }
  const Matrix cov_a = class_covariance(series, labels, class_a);
  const Matrix cov_b = one_vs_rest
                           ? [&] {
                               // Rest = everything that is not the target.
                               std::vector<int> rest_labels(labels.size());
                               for (std::size_t i = 0; i < labels.size(); ++i) {
                                 rest_labels[i] = labels[i] == class_a ? 0 : 1;
                               }
                               return class_covariance(series, rest_labels, 1);
                             }()
                           : class_covariance(series, labels, class_b);

  const Eigen::Index channels = cov_a.rows();
  const Matrix composite = cov_a + cov_b;

  Eigen::SelfAdjointEigenSolver<Matrix> comp_eig(composite);
  if (comp_eig.info() != Eigen::Success ||
      comp_eig.eigenvalues().minCoeff() <= 0.0) {
    raise(ErrorCode::NumericalFailure,
          "composite covariance is singular despite ridge");
  }
  const Matrix whitener =
      comp_eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
      comp_eig.eigenvectors().transpose();

  Matrix whitened_a = whitener * cov_a * whitener.transpose();
  whitened_a = 0.5 * (whitened_a + whitened_a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(whitened_a);
  if (eig.info() != Eigen::Success) {
    raise(ErrorCode::NumericalFailure, "eigendecomposition failed");
  }

  // Eigen returns ascending eigenvalues; rows are picked alternately from the
  // large end (class-a dominant) and the small end (class-b dominant).
  const int m = std::min<int>(n_components, static_cast<int>(channels));
  const int from_top = (m + 1) / 2;
  const int from_bottom = m / 2;
  std::vector<int> selected;
  selected.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < from_top; ++j) {
    selected.push_back(static_cast<int>(channels) - 1 - j);
  }
  for (int j = 0; j < from_bottom; ++j) selected.push_back(j);

  CspModel model;
  model.band = band;
  model.n_components = n_components;
  model.target_class = class_a;
  model.rest_class = one_vs_rest ? -1 : class_b;
  model.filters.resize(m, channels);
  model.eigenvalues.resize(m);
  for (int r = 0; r < m; ++r) {
    model.filters.row(r) = eig.eigenvectors().col(selected[r]).transpose() * whitener;
    model.eigenvalues[r] = eig.eigenvalues()[selected[r]];
  }
  fix_filter_signs(model.filters);
  return model;
}

}  // namespace

Matrix class_covariance(const std::vector<Matrix>& series,
                        const std::vector<int>& labels, int label) {
  if (series.size() != labels.size()) {
    raise(ErrorCode::DimensionMismatch, "series and labels sizes differ");
  }
  Matrix acc;
  int count = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (labels[i] != label) continue;
    const Matrix cov = trial_covariance(series[i]);
    if (count == 0) acc = cov;
    else acc += cov;
    ++count;
  }
  if (count == 0) {
    raise(ErrorCode::InsufficientData,
          "no trials for class " + std::to_string(label));
  }
  acc /= static_cast<double>(count);
  acc += kRidge * Matrix::Identity(acc.rows(), acc.cols());
  return acc;
}

CspModel fit_csp(const std::vector<Matrix>& series,
                 const std::vector<int>& labels, dsp::BandId band,
                 int n_components) {
  std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() != 2) {
    raise(ErrorCode::InvalidValue,
          "fit_csp needs exactly two classes, got " +
              std::to_string(distinct.size()));
  }
  const int class_a = *distinct.begin();
  const int class_b = *std::next(distinct.begin());
  return fit_binary(series, labels, class_a, class_b, band, n_components, false);
}

std::vector<CspModel> fit_csp_ovr(const std::vector<Matrix>& series,
                                  const std::vector<int>& labels,
                                  dsp::BandId band, int n_components) {
  std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) {
    raise(ErrorCode::InsufficientData,
          "need at least two classes, got " + std::to_string(distinct.size()));
  }
  if (distinct.size() == 2) {
    return {fit_csp(series, labels, band, n_components)};
  }
  std::vector<CspModel> models;
  models.reserve(distinct.size());
  for (int c : distinct) {
    models.push_back(fit_binary(series, labels, c, -1, band, n_components, true));
  }
  return models;
}

Vector transform(const CspModel& model, MatrixRef series) {
  if (series.rows() != model.filters.cols()) {
    raise(ErrorCode::DimensionMismatch,
          "series has " + std::to_string(series.rows()) +
              " channels, model expects " + std::to_string(model.filters.cols()));
  }
  const Eigen::Index windows = series.cols();
  if (windows < 2) {
    raise(ErrorCode::TooShort, "transform needs at least 2 windows");
  }
  const Matrix projected = model.filters * series;
  const Matrix centered = projected.colwise() - projected.rowwise().mean();
  const Vector variances =
      centered.rowwise().squaredNorm() / static_cast<double>(windows - 1);
  const double total = variances.sum();
  Vector features(variances.size());
  for (Eigen::Index j = 0; j < variances.size(); ++j) {
    const double ratio = total > 0.0 ? variances[j] / total : 0.0;
    features[j] = std::log(std::max(ratio, kVarianceFloor));
  }
  return features;
}

Vector transform(const std::vector<CspModel>& models, MatrixRef series) {
  Eigen::Index total = 0;
  for (const CspModel& m : models) total += m.filters.rows();
  Vector features(total);
  Eigen::Index offset = 0;
  for (const CspModel& m : models) {
    features.segment(offset, m.filters.rows()) = transform(m, series);
    offset += m.filters.rows();
  }
  return features;
}

}  // namespace emf::csp
