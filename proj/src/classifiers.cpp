#include "emf/classifiers.hpp"

#include "emf/rng.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace emf::classify {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct ClassInfo {
  int n_classes = 0;
  std::vector<int> counts;
};

ClassInfo validate(const Dataset& data) {
  if (data.X.rows() != static_cast<Eigen::Index>(data.y.size())) {
    raise(ErrorCode::DimensionMismatch, "X rows and label count differ");
  }
  if (data.X.cols() < 1) raise(ErrorCode::InvalidValue, "need >= 1 feature");
  if (data.y.empty()) raise(ErrorCode::InsufficientData, "empty dataset");

  ClassInfo info;
  info.n_classes = data.n_classes;
  if (info.n_classes <= 0) {
    info.n_classes = *std::max_element(data.y.begin(), data.y.end()) + 1;
  }
  if (info.n_classes < 2) {
    raise(ErrorCode::InsufficientData, "need at least two classes");
  }
  info.counts.assign(static_cast<std::size_t>(info.n_classes), 0);
  for (int label : data.y) {
    if (label < 0 || label >= info.n_classes) {
      raise(ErrorCode::UnknownLabel, "label " + std::to_string(label) +
                                         " outside 0.." +
                                         std::to_string(info.n_classes - 1));
    }
    ++info.counts[static_cast<std::size_t>(label)];
  }
  for (int c = 0; c < info.n_classes; ++c) {
    if (info.counts[static_cast<std::size_t>(c)] < 2) {
      raise(ErrorCode::InsufficientData,
            "class " + std::to_string(c) + " has " +
                std::to_string(info.counts[static_cast<std::size_t>(c)]) +
                " samples; fit needs at least 2");
    }
  }
  return info;
}

Matrix class_means(const Dataset& data, const ClassInfo& info) {
  Matrix means = Matrix::Zero(info.n_classes, data.X.cols());
  for (Eigen::Index i = 0; i < data.X.rows(); ++i) {
    means.row(data.y[static_cast<std::size_t>(i)]) += data.X.row(i);
  }
  for (int c = 0; c < info.n_classes; ++c) {
    means.row(c) /= static_cast<double>(info.counts[static_cast<std::size_t>(c)]);
  }
  return means;
}

Matrix ridged_llt_lower(Matrix cov, double ridge_scale) {
  const Eigen::Index d = cov.rows();
  const double ridge =
      std::max(ridge_scale * cov.trace() / static_cast<double>(d), 1e-12);
  cov += ridge * Matrix::Identity(d, d);
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    raise(ErrorCode::NumericalFailure, "covariance factorization failed");
  }
  return llt.matrixL();
}

Vector softmax(Vector log_scores) {
  log_scores.array() -= log_scores.maxCoeff();
  Vector scores = log_scores.array().exp();
  return scores / scores.sum();
}

double quad_form(const Matrix& chol_lower, const Vector& delta) {
  const Vector solved = chol_lower.triangularView<Eigen::Lower>().solve(delta);
  return solved.squaredNorm();
}

// ---------------------------------------------------------------------------
// LDA / QDA: Gaussian log-posteriors with uniform priors through softmax.

LdaModel fit_lda(const Dataset& data, const ClassInfo& info, const Hyper& hyper) {
  LdaModel model;
  model.means = class_means(data, info);
  const Eigen::Index d = data.X.cols();
  Matrix pooled = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < data.X.rows(); ++i) {
    const Vector delta =
        data.X.row(i).transpose() -
        model.means.row(data.y[static_cast<std::size_t>(i)]).transpose();
    pooled += delta * delta.transpose();
  }
  pooled /= static_cast<double>(data.X.rows() - info.n_classes);
  model.chol_lower = ridged_llt_lower(std::move(pooled), hyper.discriminant_ridge);
  return model;
}

Vector predict_lda(const LdaModel& model, VectorRef x) {
  const int k = static_cast<int>(model.means.rows());
  Vector log_post(k);
  for (int c = 0; c < k; ++c) {
    const Vector delta = x - model.means.row(c).transpose();
    log_post[c] = -0.5 * quad_form(model.chol_lower, delta);
  }
  return softmax(std::move(log_post));
}

QdaModel fit_qda(const Dataset& data, const ClassInfo& info, const Hyper& hyper) {
  QdaModel model;
  model.means = class_means(data, info);
  const Eigen::Index d = data.X.cols();
  model.chol_lower.resize(static_cast<std::size_t>(info.n_classes));
  model.log_dets.resize(info.n_classes);
  for (int c = 0; c < info.n_classes; ++c) {
    Matrix cov = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < data.X.rows(); ++i) {
      if (data.y[static_cast<std::size_t>(i)] != c) continue;
      const Vector delta =
          data.X.row(i).transpose() - model.means.row(c).transpose();
      cov += delta * delta.transpose();
    }
    cov /= static_cast<double>(info.counts[static_cast<std::size_t>(c)] - 1);
    model.chol_lower[static_cast<std::size_t>(c)] =
        ridged_llt_lower(std::move(cov), hyper.discriminant_ridge);
    model.log_dets[c] = 2.0 * model.chol_lower[static_cast<std::size_t>(c)]
                                  .diagonal()
                                  .array()
                                  .log()
                                  .sum();
  }
  return model;
}

Vector predict_qda(const QdaModel& model, VectorRef x) {
  const int k = static_cast<int>(model.means.rows());
  Vector log_post(k);
  for (int c = 0; c < k; ++c) {
    const Vector delta = x - model.means.row(c).transpose();
    log_post[c] =
        -0.5 * model.log_dets[c] -
        0.5 * quad_form(model.chol_lower[static_cast<std::size_t>(c)], delta);
  }
  return softmax(std::move(log_post));
}

// ---------------------------------------------------------------------------
// KNN

KnnModel fit_knn(const Dataset& data, const ClassInfo& info, const Hyper& hyper) {
  KnnModel model;
  model.X = data.X;
  model.y = data.y;
  model.k = std::min<int>(hyper.knn_k, static_cast<int>(data.X.rows()));
  model.n_classes = info.n_classes;
  return model;
}

Vector predict_knn(const KnnModel& model, VectorRef x) {
  const int n = static_cast<int>(model.X.rows());
  const Vector d2 = (model.X.rowwise() - x.transpose()).rowwise().squaredNorm();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  auto closer = [&](int i, int j) {
    if (d2[i] != d2[j]) return d2[i] < d2[j];
    return i < j;  // deterministic distance ties
  };
  std::partial_sort(order.begin(), order.begin() + model.k, order.end(), closer);

  Vector scores = Vector::Zero(model.n_classes);
  for (int j = 0; j < model.k; ++j) {
    scores[model.y[static_cast<std::size_t>(
        order[static_cast<std::size_t>(j)])]] += 1.0 / model.k;
  }

  // Vote ties: the tied classes' combined mass goes to the one owning the
  // nearest neighbor among them.
  const double top = scores.maxCoeff();
  int tied = 0;
  for (int c = 0; c < model.n_classes; ++c) {
    if (scores[c] == top) ++tied;
  }
  if (tied > 1) {
    const double tied_mass = top * tied;
    for (int j = 0; j < model.k; ++j) {
      const int cls =
          model.y[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])];
      if (scores[cls] == top) {
        for (int c = 0; c < model.n_classes; ++c) {
          if (scores[c] == top && c != cls) scores[c] = 0.0;
        }
        scores[cls] = tied_mass;
        break;
      }
    }
  }
  return scores;
}

// ---------------------------------------------------------------------------
// Linear SVM, one machine per class, Platt-calibrated on training decisions.

// Newton fit of P(target | f) = 1 / (1 + exp(a f + b)) with Platt's smoothed
// targets and a backtracking line search.
void fit_platt(const Vector& decisions, const std::vector<char>& is_target,
               double& out_a, double& out_b) {
  const int n = static_cast<int>(decisions.size());
  int prior1 = 0;
  for (char t : is_target) prior1 += t ? 1 : 0;
  const int prior0 = n - prior1;

  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  Vector target(n);
  for (int i = 0; i < n; ++i) {
    target[i] = is_target[static_cast<std::size_t>(i)] ? hi : lo;
  }

  double a = 0.0;
  double b = std::log((prior0 + 1.0) / (prior1 + 1.0));

  auto objective = [&](double pa, double pb) {
    double f = 0.0;
    for (int i = 0; i < n; ++i) {
      const double m = pa * decisions[i] + pb;
      if (m >= 0.0) f += target[i] * m + std::log1p(std::exp(-m));
      else f += (target[i] - 1.0) * m + std::log1p(std::exp(m));
    }
    return f;
  };

  double fval = objective(a, b);
  for (int iter = 0; iter < 100; ++iter) {
    double h11 = 1e-12, h22 = 1e-12, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double m = a * decisions[i] + b;
      const double p = stable_sigmoid(-m);  // P(target)
      const double d2 = p * (1.0 - p);
      h11 += decisions[i] * decisions[i] * d2;
      h22 += d2;
      h21 += decisions[i] * d2;
      const double d1 = target[i] - p;
      g1 += decisions[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;

    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;

    double step = 1.0;
    while (step >= 1e-10) {
      const double na = a + step * da;
      const double nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < 1e-10) break;
  }
  out_a = a;
  out_b = b;
}

SvmMachine fit_svm_machine(const Dataset& data, int target, const Hyper& hyper,
                           std::uint64_t seed) {
  const int n = static_cast<int>(data.X.rows());
  const Eigen::Index d = data.X.cols();
  Vector w = Vector::Zero(d);
  double b = 0.0;
  const double lambda = 1.0 / (hyper.svm_c * n);

  // Every machine reuses the same seed, hence the same shuffle sequence;
  // relabeling classes then permutes machines without changing their fits.
  Rng rng(derive_seed(seed, 101));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= hyper.svm_epochs; ++epoch) {
    const double eta = hyper.svm_step / std::sqrt(static_cast<double>(epoch));
    rng.shuffle(order);
    for (int idx : order) {
      const double sign =
          data.y[static_cast<std::size_t>(idx)] == target ? 1.0 : -1.0;
      const double margin = sign * (w.dot(data.X.row(idx)) + b);
      w *= (1.0 - eta * lambda);
      if (margin < 1.0) {
        w += eta * sign * data.X.row(idx).transpose();
        b += eta * sign;
      }
    }
  }

  SvmMachine machine;
  machine.w = std::move(w);
  machine.b = b;

  Vector decisions(n);
  std::vector<char> is_target(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    decisions[i] = machine.w.dot(data.X.row(i)) + machine.b;
    is_target[static_cast<std::size_t>(i)] =
        data.y[static_cast<std::size_t>(i)] == target;
  }
  fit_platt(decisions, is_target, machine.platt_a, machine.platt_b);
  return machine;
}

SvmModel fit_svm(const Dataset& data, const ClassInfo& info, const Hyper& hyper,
                 std::uint64_t seed) {
  SvmModel model;
  model.machines.reserve(static_cast<std::size_t>(info.n_classes));
  for (int c = 0; c < info.n_classes; ++c) {
    model.machines.push_back(fit_svm_machine(data, c, hyper, seed));
  }
  return model;
}

Vector predict_svm(const SvmModel& model, VectorRef x) {
  const int k = static_cast<int>(model.machines.size());
  Vector scores(k);
  for (int c = 0; c < k; ++c) {
    const SvmMachine& m = model.machines[static_cast<std::size_t>(c)];
    const double f = m.w.dot(x) + m.b;
    scores[c] = stable_sigmoid(-(m.platt_a * f + m.platt_b));
  }
  const double total = scores.sum();
  if (total <= 0.0) return Vector::Constant(k, 1.0 / k);
  return scores / total;
}

// ---------------------------------------------------------------------------
// GP classifier: Laplace approximation with logistic likelihood, RBF kernel,
// length-scale from the median pairwise distance.

double median_pairwise_distance(const Matrix& x) {
  const int n = static_cast<int>(x.rows());
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      dists.push_back((x.row(i) - x.row(j)).norm());
    }
  }
  if (dists.empty()) return 1.0;
  std::sort(dists.begin(), dists.end());
  const std::size_t m = dists.size();
  const double median =
      (m % 2 == 1) ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
  return median > 0.0 ? median : 1.0;
}

Matrix rbf_kernel(const Matrix& a, const Matrix& b, double length_scale) {
  const double inv = 1.0 / (2.0 * length_scale * length_scale);
  Matrix k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      k(i, j) = std::exp(-(a.row(i) - b.row(j)).squaredNorm() * inv);
    }
  }
  return k;
}

GpMachine fit_gp_machine(const Dataset& data, int target, const Hyper& hyper) {
  GpMachine machine;
  machine.X = data.X;
  machine.jitter = hyper.gp_jitter;
  machine.length_scale = median_pairwise_distance(data.X);

  const int n = static_cast<int>(data.X.rows());
  machine.y_sign.resize(n);
  for (int i = 0; i < n; ++i) {
    machine.y_sign[i] =
        data.y[static_cast<std::size_t>(i)] == target ? 1.0 : -1.0;
  }

  Matrix kernel = rbf_kernel(machine.X, machine.X, machine.length_scale);
  kernel.diagonal().array() += machine.jitter;

  // Newton iteration for the posterior mode through the
  // B = I + W^1/2 K W^1/2 factorization.
  Vector f = Vector::Zero(n);
  for (int iter = 0; iter < hyper.gp_newton_cap; ++iter) {
    Vector w(n), sqrt_w(n), grad(n);
    for (int i = 0; i < n; ++i) {
      const double pi = stable_sigmoid(f[i]);
      w[i] = std::max(pi * (1.0 - pi), 1e-15);
      sqrt_w[i] = std::sqrt(w[i]);
      grad[i] = 0.5 * (machine.y_sign[i] + 1.0) - pi;
    }
    Matrix b = Matrix::Identity(n, n) +
               sqrt_w.asDiagonal() * kernel * sqrt_w.asDiagonal();
    Eigen::LLT<Matrix> llt(b);
    if (llt.info() != Eigen::Success) {
      raise(ErrorCode::NumericalFailure, "GP Newton factorization failed");
    }
    const Vector rhs = w.cwiseProduct(f) + grad;
    const Vector inner = llt.solve(sqrt_w.cwiseProduct(kernel * rhs));
    const Vector a = rhs - sqrt_w.cwiseProduct(inner);
    const Vector f_next = kernel * a;
    const double delta = (f_next - f).cwiseAbs().maxCoeff();
    f = f_next;
    if (delta < hyper.gp_tol) break;
  }
  machine.f_hat = f;
  finalize(machine);
  return machine;
}

double predict_gp_machine(const GpMachine& m, VectorRef x) {
  const int n = static_cast<int>(m.X.rows());
  Vector kstar(n);
  const double inv = 1.0 / (2.0 * m.length_scale * m.length_scale);
  for (int i = 0; i < n; ++i) {
    kstar[i] = std::exp(-(m.X.row(i).transpose() - x).squaredNorm() * inv);
  }
  const double mean = kstar.dot(m.grad);
  const Vector v = m.chol_b_lower.triangularView<Eigen::Lower>().solve(
      m.sqrt_w.cwiseProduct(kstar));
  const double var = std::max(1.0 - v.squaredNorm(), 0.0);
  // Probit-style correction of the logistic integral over the latent.
  return stable_sigmoid(mean / std::sqrt(1.0 + M_PI * var / 8.0));
}

GpModel fit_gp(const Dataset& data, const ClassInfo& info, const Hyper& hyper) {
  GpModel model;
  model.n_classes = info.n_classes;
  if (info.n_classes == 2) {
    model.machines.push_back(fit_gp_machine(data, 1, hyper));
  } else {
    model.machines.reserve(static_cast<std::size_t>(info.n_classes));
    for (int c = 0; c < info.n_classes; ++c) {
      model.machines.push_back(fit_gp_machine(data, c, hyper));
    }
  }
  return model;
}

Vector predict_gp(const GpModel& model, VectorRef x) {
  if (model.n_classes == 2) {
    const double p = predict_gp_machine(model.machines[0], x);
    Vector scores(2);
    scores << 1.0 - p, p;
    return scores;
  }
  Vector scores(model.n_classes);
  for (int c = 0; c < model.n_classes; ++c) {
    scores[c] =
        predict_gp_machine(model.machines[static_cast<std::size_t>(c)], x);
  }
  const double total = scores.sum();
  if (total <= 0.0) {
    return Vector::Constant(model.n_classes, 1.0 / model.n_classes);
  }
  return scores / total;
}

void check_dimension(Eigen::Index expected, Eigen::Index got) {
  if (expected != got) {
    raise(ErrorCode::DimensionMismatch,
          "feature vector has " + std::to_string(got) +
              " entries, model expects " + std::to_string(expected));
  }
}

}  // namespace

void finalize(GpMachine& machine) {
  const int n = static_cast<int>(machine.X.rows());
  Matrix kernel = rbf_kernel(machine.X, machine.X, machine.length_scale);
  kernel.diagonal().array() += machine.jitter;
  machine.grad.resize(n);
  machine.sqrt_w.resize(n);
  for (int i = 0; i < n; ++i) {
    const double pi = stable_sigmoid(machine.f_hat[i]);
    machine.grad[i] = 0.5 * (machine.y_sign[i] + 1.0) - pi;
    machine.sqrt_w[i] = std::sqrt(std::max(pi * (1.0 - pi), 1e-15));
  }
  Matrix b = Matrix::Identity(n, n) +
             machine.sqrt_w.asDiagonal() * kernel * machine.sqrt_w.asDiagonal();
  Eigen::LLT<Matrix> llt(b);
  if (llt.info() != Eigen::Success) {
    raise(ErrorCode::NumericalFailure, "GP finalize factorization failed");
  }
  machine.chol_b_lower = llt.matrixL();
}

const std::array<ClassifierId, kClassifierCount>& classifier_catalog() {
  static const std::array<ClassifierId, kClassifierCount> catalog = {
      ClassifierId::Lda, ClassifierId::Qda, ClassifierId::Knn,
      ClassifierId::Svm, ClassifierId::Gp};
  return catalog;
}

std::string_view to_token(ClassifierId id) {
  switch (id) {
    case ClassifierId::Lda: return "lda";
    case ClassifierId::Qda: return "qda";
    case ClassifierId::Knn: return "knn";
    case ClassifierId::Svm: return "svm";
    case ClassifierId::Gp: return "gp";
  }
  return "?";
}

ClassifierId classifier_from_token(std::string_view token) {
  for (ClassifierId id : classifier_catalog()) {
    if (to_token(id) == token) return id;
  }
  raise(ErrorCode::InvalidValue,
        "unknown classifier token '" + std::string(token) + "'");
}

Model fit(ClassifierId id, const Dataset& data, const Hyper& hyper,
          std::uint64_t seed) {
  const ClassInfo info = validate(data);
  switch (id) {
    case ClassifierId::Lda: return fit_lda(data, info, hyper);
    case ClassifierId::Qda: return fit_qda(data, info, hyper);
    case ClassifierId::Knn: return fit_knn(data, info, hyper);
    case ClassifierId::Svm: return fit_svm(data, info, hyper, seed);
    case ClassifierId::Gp: return fit_gp(data, info, hyper);
  }
  raise(ErrorCode::InvalidValue, "unknown classifier id");
}

Vector predict_scores(const Model& model, VectorRef x) {
  check_dimension(feature_count(model), x.size());
  return std::visit(
      [&](const auto& m) -> Vector {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LdaModel>) return predict_lda(m, x);
        else if constexpr (std::is_same_v<T, QdaModel>) return predict_qda(m, x);
        else if constexpr (std::is_same_v<T, KnnModel>) return predict_knn(m, x);
        else if constexpr (std::is_same_v<T, SvmModel>) return predict_svm(m, x);
        else return predict_gp(m, x);
      },
      model);
}

int n_classes(const Model& model) {
  return std::visit(
      [](const auto& m) -> int {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LdaModel>) {
          return static_cast<int>(m.means.rows());
        } else if constexpr (std::is_same_v<T, QdaModel>) {
          return static_cast<int>(m.means.rows());
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          return m.n_classes;
        } else if constexpr (std::is_same_v<T, SvmModel>) {
          return static_cast<int>(m.machines.size());
        } else {
          return m.n_classes;
        }
      },
      model);
}

int feature_count(const Model& model) {
  return std::visit(
      [](const auto& m) -> int {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LdaModel>) {
          return static_cast<int>(m.means.cols());
        } else if constexpr (std::is_same_v<T, QdaModel>) {
          return static_cast<int>(m.means.cols());
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          return static_cast<int>(m.X.cols());
        } else if constexpr (std::is_same_v<T, SvmModel>) {
          return static_cast<int>(m.machines.front().w.size());
        } else {
          return static_cast<int>(m.machines.front().X.cols());
        }
      },
      model);
}

}  // namespace emf::classify
