#pragma once

#include "emf/dsp.hpp"
#include "emf/types.hpp"

#include <vector>

// Common Spatial Patterns over (differenced) band-power series. Filters come
// from whitening the composite class covariance and eigendecomposing the
// whitened class-a covariance; per-trial features are the log of the
// normalized variances of the filtered series.
namespace emf::csp {

struct CspModel {
  dsp::BandId band = dsp::BandId::All;
  Matrix filters;       // m x channels
  Vector eigenvalues;   // class-a variance share per filter row, in [0, 1]
  int n_components = 0; // requested count before capping at channel count
  int target_class = 0;
  int rest_class = -1;  // -1 means one-vs-rest
};

// Average of trace-normalized per-trial spatial covariances over the trials
// carrying `label`, plus a 1e-8 ridge. Each series is channels x windows.
Matrix class_covariance(const std::vector<Matrix>& series,
                        const std::vector<int>& labels, int label);

// Two-class fit: labels must contain exactly two distinct values. Keeps the
// ceil(m/2) largest- and floor(m/2) smallest-eigenvalue filters,
// m = min(n_components, channels).
CspModel fit_csp(const std::vector<Matrix>& series,
                 const std::vector<int>& labels, dsp::BandId band,
                 int n_components);

// One-vs-rest: one model per class; degenerates to a single fit_csp model
// when only two classes are present.
std::vector<CspModel> fit_csp_ovr(const std::vector<Matrix>& series,
                                  const std::vector<int>& labels,
                                  dsp::BandId band, int n_components);

// log(var_j / sum_k var_k) of the filtered series, variance taken over
// windows; normalized variances are floored at 1e-12 before the log.
Vector transform(const CspModel& model, MatrixRef series);

// Concatenation of per-model features in model order.
Vector transform(const std::vector<CspModel>& models, MatrixRef series);

}  // namespace emf::csp
