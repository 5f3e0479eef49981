#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fontid/error.hpp"
#include "fontid/label.hpp"
#include "fontid/page_features.hpp"

namespace fontid {

inline constexpr double kDefaultSigma = 300.0;
inline constexpr double kDefaultLambda = 0.1;
inline constexpr int kModelFormatVersion = 1;

using PartialLabels = std::vector<std::optional<Label>>;

// Posterior over (Blackletter, Roman, Mixed).
struct ClassPosterior {
  std::array<double, kNumClasses> p{};

  double operator[](std::size_t i) const { return p[i]; }
  Label argmax() const {
    return static_cast<Label>(std::max_element(p.begin(), p.end()) - p.begin());
  }
};

// Symmetric Gaussian affinities exp(-|xi - xj|^2 / sigma^2), unit diagonal.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  SimilarityMatrix(Eigen::MatrixXd values, double sigma) : values_(std::move(values)), sigma_(sigma) {}

  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  double sigma() const noexcept { return sigma_; }
  const Eigen::MatrixXd& matrix() const noexcept { return values_; }

 private:
  Eigen::MatrixXd values_;
  double sigma_ = kDefaultSigma;
};

inline void require_positive_sigma(double sigma) {
  if (!(sigma > 0.0)) throw Error(Errc::parameter, "similarity: sigma must be positive, got " + std::to_string(sigma));
}

inline double similarity(std::span<const double> xi, std::span<const double> xj, double sigma) {
  require_positive_sigma(sigma);
  if (xi.size() != xj.size()) throw Error(Errc::shape, "similarity: vectors differ in dimension");
  double d2 = 0.0;
  for (std::size_t k = 0; k < xi.size(); ++k) {
    const double diff = xi[k] - xj[k];
    d2 += diff * diff;
  }
  return std::exp(-d2 / (sigma * sigma));
}

inline double similarity(const BofVector& xi, const BofVector& xj, double sigma) {
  return similarity(std::span<const double>(xi.bins), std::span<const double>(xj.bins), sigma);
}

inline SimilarityMatrix similarity_matrix(std::span<const BofVector> xs, double sigma) {
  require_positive_sigma(sigma);
  if (xs.empty()) throw Error(Errc::insufficient_data, "similarity_matrix: no vectors");
  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = similarity(xs[static_cast<std::size_t>(i)], xs[static_cast<std::size_t>(j)], sigma);
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return {std::move(s), sigma};
}

// ---------------------------------------------------------------------------
// Label propagation

struct PropagationParams {
  double alpha = 0.99;
  double tolerance = 1e-6;
  int max_iterations = 1000;
};

// Iterates F <- alpha * Sn * F + (1 - alpha) * Y on the row-normalized graph,
// re-clamping labeled rows each sweep. Returns row-normalized posteriors of
// the unlabeled nodes in node order.
inline std::vector<ClassPosterior> label_propagate(const SimilarityMatrix& s, const PartialLabels& labels,
                                                   const PropagationParams& params = {}) {
  if (labels.size() != s.size()) throw Error(Errc::shape, "label_propagate: label count != matrix size");
  if (!(params.alpha > 0.0 && params.alpha < 1.0)) {
    throw Error(Errc::parameter, "label_propagate: alpha must lie in (0, 1)");
  }
  const auto n = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, kNumClasses);
  bool any_labeled = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[static_cast<std::size_t>(i)]) {
      y(i, index_of(*labels[static_cast<std::size_t>(i)])) = 1.0;
      any_labeled = true;
    }
  }
  if (!any_labeled) throw Error(Errc::insufficient_labels, "label_propagate: no labeled nodes");

  const Eigen::VectorXd row_sums = s.matrix().rowwise().sum();
  const Eigen::MatrixXd normalized = s.matrix().array().colwise() / row_sums.array();
  Eigen::MatrixXd f = y;
  for (int iter = 0; iter < params.max_iterations; ++iter) {
    Eigen::MatrixXd next = params.alpha * (normalized * f) + (1.0 - params.alpha) * y;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (labels[static_cast<std::size_t>(i)]) next.row(i) = y.row(i);
    }
    const double change = (next - f).cwiseAbs().maxCoeff();
    f = std::move(next);
    if (change < params.tolerance) break;
  }

  std::vector<ClassPosterior> out;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[static_cast<std::size_t>(i)]) continue;
    ClassPosterior post;
    const double total = f.row(i).sum();
    for (int c = 0; c < kNumClasses; ++c) {
      post.p[static_cast<std::size_t>(c)] = total > 0.0 ? f(i, c) / total : 1.0 / kNumClasses;
    }
    out.push_back(post);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Logistic label propagation

// Coordinates gradient descent runs in. Gradient descent from zero on
// separable data drifts towards the max-margin direction of whatever
// geometry it runs in, so the choice matters once labels are scarce.
enum class Preconditioner {
  none,       // raw features
  isotropic,  // centered, one global scale: Euclidean geometry kept
  whiten,     // centered, unit variance along every covariance eigenvector
};

inline std::string_view to_string(Preconditioner p) {
  switch (p) {
    case Preconditioner::none: return "none";
    case Preconditioner::isotropic: return "isotropic";
    case Preconditioner::whiten: return "whiten";
  }
  return "?";
}

inline std::optional<Preconditioner> try_parse_preconditioner(std::string_view text) {
  for (auto p : {Preconditioner::none, Preconditioner::isotropic, Preconditioner::whiten}) {
    if (text == to_string(p)) return p;
  }
  return std::nullopt;
}

struct LlpOptions {
  Preconditioner preconditioner = Preconditioner::isotropic;
  double sigma = kDefaultSigma;
  double lambda = kDefaultLambda;
  bool normalize_pairs = true;  // divide the smoothness sum by n(n-1)/2
  int max_iterations = 2000;
  double gradient_tolerance = 1e-5;
  double armijo = 1e-4;
  std::optional<Eigen::MatrixXd> warm_start;
  bool record_history = true;
};

struct LlpModel {
  Eigen::MatrixXd weights;  // kNumClasses x (dim + 1), last column is the bias
  double sigma = kDefaultSigma;
  double lambda = kDefaultLambda;
  bool normalize_pairs = true;
  int iterations = 0;
  double final_loss = 0.0;
  double gradient_norm = 0.0;
  std::size_t labeled_count = 0;
  std::size_t unlabeled_count = 0;
  std::vector<double> loss_history;  // J after every accepted step, starting at W0
  std::string codebook_hash;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(weights.cols()) - 1; }
};

inline Eigen::MatrixXd stack_features(std::span<const BofVector> xs) {
  if (xs.empty()) return Eigen::MatrixXd(0, 0);
  const auto d = static_cast<Eigen::Index>(xs.front().size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(xs.size()), d);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (static_cast<Eigen::Index>(xs[i].size()) != d) throw Error(Errc::shape, "feature vectors differ in dimension");
    for (Eigen::Index k = 0; k < d; ++k) m(static_cast<Eigen::Index>(i), k) = xs[i].bins[static_cast<std::size_t>(k)];
  }
  return m;
}

// Row-wise softmax of the logits X_aug * W^T.
inline Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    double total = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      p(i, c) = std::exp(logits(i, c) - mx);
      total += p(i, c);
    }
    p.row(i) /= total;
  }
  return p;
}

// J(W) = sum_labeled CE(p_W(x_i), y_i) + w * sum_{i<j} S_ij |p_W(x_i) - p_W(x_j)|^2
// with w = lambda (or lambda / #pairs when normalize_pairs is set).
class LlpObjective {
 public:
  struct Evaluation {
    double value = 0.0;
    Eigen::MatrixXd probs;  // n x C
    Eigen::MatrixXd sp;     // (S - diag S) * probs
  };

  LlpObjective(Eigen::MatrixXd features, PartialLabels labels, const SimilarityMatrix& s, double lambda,
               bool normalize_pairs)
      : labels_(std::move(labels)), s_(&s) {
    const Eigen::Index n = features.rows();
    if (static_cast<std::size_t>(n) != labels_.size() || s.size() != labels_.size()) {
      throw Error(Errc::shape, "LLP: features, labels and similarity matrix disagree in size");
    }
    x_.resize(n, features.cols() + 1);
    x_.leftCols(features.cols()) = features;
    x_.col(features.cols()).setOnes();
    const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
    weight_ = lambda;
    if (normalize_pairs) weight_ = pairs > 0.0 ? lambda / pairs : 0.0;
    diag_ = s.matrix().diagonal();
    degree_ = s.matrix().rowwise().sum() - diag_;
  }

  Eigen::Index dim() const { return x_.cols(); }
  double pair_weight() const { return weight_; }

  Evaluation evaluate(const Eigen::MatrixXd& w) const {
    Evaluation e;
    const Eigen::MatrixXd logits = x_ * w.transpose();
    e.probs = softmax_rows(logits);
    double ce = 0.0;
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (!labels_[i]) continue;
      const auto row = static_cast<Eigen::Index>(i);
      const double mx = logits.row(row).maxCoeff();
      const double lse = mx + std::log((logits.row(row).array() - mx).exp().sum());
      ce += lse - logits(row, index_of(*labels_[i]));
    }
    double smooth = 0.0;
    if (weight_ != 0.0) {
      e.sp = s_->matrix() * e.probs;
      e.sp -= (diag_.asDiagonal() * e.probs);
      // sum_{i<j} S_ij |p_i - p_j|^2 = sum_i deg_i |p_i|^2 - sum_{i != j} S_ij p_i . p_j
      smooth = (degree_.array() * e.probs.rowwise().squaredNorm().array()).sum() -
               (e.probs.array() * e.sp.array()).sum();
    }
    e.value = ce + weight_ * smooth;
    return e;
  }

  double value(const Eigen::MatrixXd& w) const { return evaluate(w).value; }

  Eigen::MatrixXd gradient(const Evaluation& e) const {
    const Eigen::Index n = x_.rows();
    Eigen::MatrixXd gz = Eigen::MatrixXd::Zero(n, kNumClasses);
    if (weight_ != 0.0) {
      // dSmooth/dP = 2 (D - A) P, pushed through the softmax Jacobian diag(p) - p p^T.
      const Eigen::MatrixXd gp = 2.0 * weight_ * (degree_.asDiagonal() * e.probs - e.sp);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double dot = e.probs.row(i).dot(gp.row(i));
        gz.row(i) = e.probs.row(i).array() * (gp.row(i).array() - dot);
      }
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (!labels_[i]) continue;
      const auto row = static_cast<Eigen::Index>(i);
      gz.row(row) += e.probs.row(row);
      gz(row, index_of(*labels_[i])) -= 1.0;
    }
    return gz.transpose() * x_;
  }

  Eigen::MatrixXd gradient(const Eigen::MatrixXd& w) const { return gradient(evaluate(w)); }

 private:
  Eigen::MatrixXd x_;  // n x (d + 1)
  PartialLabels labels_;
  const SimilarityMatrix* s_;
  Eigen::VectorXd diag_;
  Eigen::VectorXd degree_;
  double weight_ = 0.0;
};

inline void require_all_classes(const PartialLabels& labels) {
  std::array<bool, kNumClasses> present{};
  for (const auto& l : labels) {
    if (l) present[static_cast<std::size_t>(index_of(*l))] = true;
  }
  for (int c = 0; c < kNumClasses; ++c) {
    if (!present[static_cast<std::size_t>(c)]) {
      throw Error(Errc::degenerate_training,
                  "train_llp: no labeled example of class " + std::string(to_string(label_from_index(c))));
    }
  }
}

// Affine change of input coordinates x -> (x - mean) * basis. The model
// family is unchanged since there is a bias; only the coordinates the
// descent runs in differ. Whitening drops near-constant directions (BoF
// columns sum to one, so there is always one).
struct InputWhitening {
  Eigen::RowVectorXd mean;
  Eigen::MatrixXd basis;  // d x r

  static InputWhitening fit(const Eigen::MatrixXd& x, Preconditioner kind = Preconditioner::whiten) {
    InputWhitening w;
    const Eigen::Index d = x.cols();
    if (kind == Preconditioner::none) {
      w.mean = Eigen::RowVectorXd::Zero(d);
      w.basis = Eigen::MatrixXd::Identity(d, d);
      return w;
    }
    const double n = static_cast<double>(std::max<Eigen::Index>(x.rows(), 1));
    w.mean = x.colwise().sum() / n;
    const Eigen::MatrixXd centered = x.rowwise() - w.mean;
    if (kind == Preconditioner::isotropic) {
      // Root-mean-square distance to the centroid becomes 1.
      const double rms = std::sqrt(centered.squaredNorm() / n);
      w.basis = Eigen::MatrixXd::Identity(d, d) / (rms > 1e-150 ? rms : 1.0);
      return w;
    }
    const Eigen::MatrixXd cov = centered.transpose() * centered / n;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::VectorXd values = eig.eigenvalues();
    const double top = values.size() > 0 ? values.maxCoeff() : 0.0;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = values.size() - 1; j >= 0; --j) {
      if (values(j) > 1e-10 * top && values(j) > 1e-300) keep.push_back(j);
    }
    w.basis.resize(d, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
      w.basis.col(static_cast<Eigen::Index>(k)) = eig.eigenvectors().col(keep[k]) / std::sqrt(values(keep[k]));
    }
    return w;
  }
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const { return (x.rowwise() - mean) * basis; }
  Eigen::Index dim() const { return basis.cols(); }
  // Weights over transformed inputs -> weights over raw inputs.
  Eigen::MatrixXd to_raw(const Eigen::MatrixXd& w) const {
    const Eigen::Index r = basis.cols();
    const Eigen::Index d = basis.rows();
    Eigen::MatrixXd out(w.rows(), d + 1);
    out.leftCols(d) = w.leftCols(r) * basis.transpose();
    out.col(d) = w.col(r) - out.leftCols(d) * mean.transpose();
    return out;
  }
  // Raw weights -> transformed weights giving the same logits on the training
  // inputs (least squares through the basis).
  Eigen::MatrixXd from_raw(const Eigen::MatrixXd& w) const {
    const Eigen::Index r = basis.cols();
    const Eigen::Index d = basis.rows();
    Eigen::MatrixXd out(w.rows(), r + 1);
    const Eigen::MatrixXd gram = basis.transpose() * basis;
    out.leftCols(r) = gram.ldlt().solve(basis.transpose() * w.leftCols(d).transpose()).transpose();
    out.col(r) = w.col(d) + w.leftCols(d) * mean.transpose();
    return out;
  }
};

// Full-batch gradient descent from zero weights (or a warm start), run in
// preconditioned coordinates and reported in raw-feature weights. Each step
// moves along -grad J; the trial length is the Barzilai-Borwein estimate from
// the previous step and is halved until the Armijo condition holds, so J
// never increases between accepted iterates. gradient_norm refers to the
// preconditioned coordinates.
inline LlpModel train_llp(const Eigen::MatrixXd& features, const PartialLabels& labels, const SimilarityMatrix& s,
                          const LlpOptions& options = {}) {
  if (!(options.lambda >= 0.0)) throw Error(Errc::parameter, "train_llp: lambda must be >= 0");
  require_positive_sigma(options.sigma);
  require_all_classes(labels);

  const InputWhitening scaling = InputWhitening::fit(features, options.preconditioner);
  const LlpObjective objective(scaling.apply(features), labels, s, options.lambda, options.normalize_pairs);
  LlpModel model;
  model.sigma = options.sigma;
  model.lambda = options.lambda;
  model.normalize_pairs = options.normalize_pairs;
  for (const auto& l : labels) (l ? model.labeled_count : model.unlabeled_count)++;

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(kNumClasses, objective.dim());
  if (options.warm_start) {
    if (options.warm_start->rows() != w.rows() || options.warm_start->cols() != features.cols() + 1) {
      throw Error(Errc::shape, "train_llp: warm-start weights have the wrong shape");
    }
    w = scaling.from_raw(*options.warm_start);
  }

  auto current = objective.evaluate(w);
  Eigen::MatrixXd grad = objective.gradient(current);
  if (options.record_history) model.loss_history.push_back(current.value);
  double step = 1.0;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    const double g2 = grad.squaredNorm();
    if (std::sqrt(g2) < options.gradient_tolerance) break;
    bool accepted = false;
    Eigen::MatrixXd w_next;
    LlpObjective::Evaluation next;
    while (step > 1e-20) {
      w_next = w - step * grad;
      next = objective.evaluate(w_next);
      if (next.value <= current.value - options.armijo * step * g2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    Eigen::MatrixXd grad_next = objective.gradient(next);
    const Eigen::MatrixXd ds = w_next - w;
    const double sy = (ds.array() * (grad_next - grad).array()).sum();
    step = sy > 0.0 ? ds.squaredNorm() / sy : 2.0 * step;
    step = std::clamp(step, 1e-12, 1e12);
    w = std::move(w_next);
    current = std::move(next);
    grad = std::move(grad_next);
    if (options.record_history) model.loss_history.push_back(current.value);
  }
  model.weights = scaling.to_raw(w);
  model.iterations = iter;
  model.final_loss = current.value;
  model.gradient_norm = grad.norm();
  return model;
}

// Convenience form taking labeled and unlabeled pages separately.
inline LlpModel train_llp(std::span<const BofVector> labeled, std::span<const Label> labels,
                          std::span<const BofVector> unlabeled, const LlpOptions& options = {}) {
  if (labeled.size() != labels.size()) throw Error(Errc::shape, "train_llp: one label per labeled page required");
  std::vector<BofVector> all(labeled.begin(), labeled.end());
  all.insert(all.end(), unlabeled.begin(), unlabeled.end());
  PartialLabels partial(labels.begin(), labels.end());
  partial.resize(all.size());
  require_all_classes(partial);
  const SimilarityMatrix s = similarity_matrix(all, options.sigma);
  return train_llp(stack_features(all), partial, s, options);
}

inline ClassPosterior predict(const LlpModel& model, std::span<const double> x) {
  if (x.size() != model.dim()) {
    throw Error(Errc::shape, "predict: expected " + std::to_string(model.dim()) + " features, got " +
                                 std::to_string(x.size()));
  }
  std::array<double, kNumClasses> logits{};
  for (int c = 0; c < kNumClasses; ++c) {
    double z = model.weights(c, static_cast<Eigen::Index>(x.size()));
    for (std::size_t k = 0; k < x.size(); ++k) z += model.weights(c, static_cast<Eigen::Index>(k)) * x[k];
    logits[static_cast<std::size_t>(c)] = z;
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  ClassPosterior post;
  double total = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    post.p[c] = std::exp(logits[c] - mx);
    total += post.p[c];
  }
  for (auto& v : post.p) v /= total;
  return post;
}

inline ClassPosterior predict(const LlpModel& model, const BofVector& x) {
  return predict(model, std::span<const double>(x.bins));
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::json model_to_json(const LlpModel& model) {
  nlohmann::json j;
  j["format"] = "fontid.llp_model";
  j["version"] = kModelFormatVersion;
  std::vector<std::vector<double>> rows;
  for (Eigen::Index c = 0; c < model.weights.rows(); ++c) {
    std::vector<double> row;
    for (Eigen::Index k = 0; k < model.weights.cols(); ++k) row.push_back(model.weights(c, k));
    rows.push_back(std::move(row));
  }
  j["weights"] = rows;
  j["classes"] = {"Blackletter", "Roman", "Mixed"};
  j["sigma"] = model.sigma;
  j["lambda"] = model.lambda;
  j["normalize_pairs"] = model.normalize_pairs;
  j["codebook_hash"] = model.codebook_hash;
  j["training"] = {{"iterations", model.iterations},
                   {"final_loss", model.final_loss},
                   {"gradient_norm", model.gradient_norm},
                   {"labeled", model.labeled_count},
                   {"unlabeled", model.unlabeled_count}};
  return j;
}

inline LlpModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "fontid.llp_model") throw Error(Errc::parse, "model: unexpected format tag");
    if (j.at("version").get<int>() != kModelFormatVersion) throw Error(Errc::parse, "model: unsupported version");
    const auto rows = j.at("weights").get<std::vector<std::vector<double>>>();
    if (rows.size() != static_cast<std::size_t>(kNumClasses) || rows.front().size() < 2) {
      throw Error(Errc::shape, "model: weight matrix must have 3 rows");
    }
    LlpModel model;
    model.weights.resize(kNumClasses, static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t c = 0; c < rows.size(); ++c) {
      if (rows[c].size() != rows.front().size()) throw Error(Errc::shape, "model: ragged weight rows");
      for (std::size_t k = 0; k < rows[c].size(); ++k) {
        model.weights(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) = rows[c][k];
      }
    }
    model.sigma = j.at("sigma").get<double>();
    model.lambda = j.at("lambda").get<double>();
    model.normalize_pairs = j.value("normalize_pairs", true);
    model.codebook_hash = j.value("codebook_hash", "");
    const auto& t = j.at("training");
    model.iterations = t.value("iterations", 0);
    model.final_loss = t.value("final_loss", 0.0);
    model.gradient_norm = t.value("gradient_norm", 0.0);
    model.labeled_count = t.value("labeled", std::size_t{0});
    model.unlabeled_count = t.value("unlabeled", std::size_t{0});
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse, std::string("model: ") + e.what());
  }
}

inline void save_model(const LlpModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write model: " + path);
  out << model_to_json(model).dump(2) << "\n";
}

inline LlpModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open model: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse, "model " + path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace fontid
