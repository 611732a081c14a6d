#pragma once

#include "emf/types.hpp"

#include <array>
#include <cstdint>
#include <string_view>
#include <variant>
#include <vector>

// The five base classifier families behind a single fit / predict-scores
// contract. Every classifier emits K scores in [0, 1] summing to 1; the weak
// ensemble members feed the fusion phases. All fits are deterministic given
// the seed (the SVM subgradient pass is the only stochastic one and uses a
// seeded shuffle).
namespace emf::classify {

enum class ClassifierId { Lda, Qda, Knn, Svm, Gp };

inline constexpr int kClassifierCount = 5;

const std::array<ClassifierId, kClassifierCount>& classifier_catalog();
std::string_view to_token(ClassifierId id);
ClassifierId classifier_from_token(std::string_view token);

struct Dataset {
  Matrix X;            // trials x features
  std::vector<int> y;  // labels in 0..n_classes-1
  int n_classes = 0;   // 0 means infer from labels
};

// Fixed defaults, all overridable per run.
struct Hyper {
  int knn_k = 5;
  double discriminant_ridge = 1e-3;  // scaled by tr(cov)/d
  double svm_c = 1.0;
  int svm_epochs = 500;
  double svm_step = 0.1;
  double gp_jitter = 1e-6;
  int gp_newton_cap = 50;
  double gp_tol = 1e-8;
};

struct LdaModel {
  Matrix means;       // K x d
  Matrix chol_lower;  // LLT factor of the pooled (ridged) covariance
};

struct QdaModel {
  Matrix means;
  std::vector<Matrix> chol_lower;  // per-class factors
  Vector log_dets;
};

struct KnnModel {
  Matrix X;
  std::vector<int> y;
  int k = 5;
  int n_classes = 0;
};

struct SvmMachine {
  Vector w;
  double b = 0.0;
  double platt_a = 0.0;
  double platt_b = 0.0;
};

struct SvmModel {
  std::vector<SvmMachine> machines;  // one per class (one-vs-rest)
};

struct GpMachine {
  Matrix X;
  Vector y_sign;        // +1 target class, -1 rest
  Vector f_hat;         // Laplace mode
  double length_scale = 1.0;
  double jitter = 1e-6;
  // Derived from the mode; rebuilt by finalize() after fit or load.
  Vector grad;
  Vector sqrt_w;
  Matrix chol_b_lower;
};

struct GpModel {
  std::vector<GpMachine> machines;  // one for K=2, else one per class
  int n_classes = 0;
};

using Model = std::variant<LdaModel, QdaModel, KnnModel, SvmModel, GpModel>;

// Recomputes the GP quantities derived from the stored mode. Must be called
// after deserializing a GpModel.
void finalize(GpMachine& machine);

Model fit(ClassifierId id, const Dataset& data, const Hyper& hyper,
          std::uint64_t seed);

Vector predict_scores(const Model& model, VectorRef x);

int n_classes(const Model& model);
int feature_count(const Model& model);

}  // namespace emf::classify
