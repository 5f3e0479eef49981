#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "fontid/dataset.hpp"
#include "fontid/error.hpp"
#include "fontid/label.hpp"
#include "fontid/llp.hpp"
#include "fontid/random.hpp"
#include "fontid/sampler.hpp"
#include "fontid/word_features.hpp"

namespace fontid {

struct ExperimentConfig {
  std::vector<Strategy> strategies{Strategy::s5};
  int batch_size = kDefaultBatchSize;
  int repetitions = 20;
  std::uint64_t seed = 0;
  std::array<int, kNumClasses> test_per_class{200, 200, 200};
  int seed_per_class = 1;
  LlpOptions llp{};
};

struct CurvePoint {
  std::size_t labeled_count = 0;
  double accuracy = 0.0;
  std::array<double, kNumClasses> recall{};  // NaN when the test set lacks the class
};

struct LearningCurve {
  Strategy strategy = Strategy::random;
  std::uint64_t seed = 0;
  std::vector<CurvePoint> points;
  std::optional<std::string> aborted;  // set when a round failed; points keep the partial curve
};

// ---------------------------------------------------------------------------
// Splits

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<std::string> warnings;
};

// Stratified random test set with the requested per-class counts; everything
// else (including unlabeled pages) is the training pool. Both lists ascend.
inline Split split_dataset(const std::vector<std::optional<Label>>& labels,
                           const std::array<int, kNumClasses>& test_per_class, Rng& rng) {
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) by_class[static_cast<std::size_t>(index_of(*labels[i]))].push_back(i);
  }
  Split split;
  std::vector<bool> in_test(labels.size(), false);
  for (int c = 0; c < kNumClasses; ++c) {
    auto& members = by_class[static_cast<std::size_t>(c)];
    const int want = test_per_class[static_cast<std::size_t>(c)];
    if (want < 0 || static_cast<std::size_t>(want) > members.size()) {
      throw Error(Errc::configuration, "split: class " + std::string(to_string(label_from_index(c))) + " has " +
                                           std::to_string(members.size()) + " pages but the test split asks for " +
                                           std::to_string(want));
    }
    shuffle(members, rng);
    for (int k = 0; k < want; ++k) in_test[members[static_cast<std::size_t>(k)]] = true;
  }
  for (std::size_t i = 0; i < labels.size(); ++i) (in_test[i] ? split.test : split.train).push_back(i);
  if (split.train.empty()) split.warnings.push_back("training pool is empty after the test split");
  return split;
}

// ---------------------------------------------------------------------------
// Evaluation

inline CurvePoint evaluate_model(const LlpModel& model, std::span<const BofVector> xs, std::span<const Label> ys,
                                 std::size_t labeled_count) {
  CurvePoint pt;
  pt.labeled_count = labeled_count;
  std::array<std::size_t, kNumClasses> hits{};
  std::array<std::size_t, kNumClasses> totals{};
  std::size_t correct = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Label truth = ys[i];
    const bool ok = predict(model, xs[i]).argmax() == truth;
    correct += ok;
    ++totals[static_cast<std::size_t>(index_of(truth))];
    hits[static_cast<std::size_t>(index_of(truth))] += ok;
  }
  pt.accuracy = xs.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(xs.size());
  for (std::size_t c = 0; c < pt.recall.size(); ++c) {
    pt.recall[c] = totals[c] ? static_cast<double>(hits[c]) / static_cast<double>(totals[c]) : std::nan("");
  }
  return pt;
}

// ---------------------------------------------------------------------------
// Active learning simulation

struct ActiveLearningTask {
  std::vector<BofVector> pool;       // training pool, node order
  std::vector<Label> pool_labels;    // oracle answers
  std::vector<BofVector> test;
  std::vector<Label> test_labels;
};

// Picks `per_class` pool nodes of every class uniformly at random.
inline std::vector<std::size_t> draw_seed_set(const std::vector<Label>& pool_labels, int per_class, Rng& rng) {
  std::vector<std::size_t> seed;
  for (Label c : kAllLabels) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < pool_labels.size(); ++i) {
      if (pool_labels[i] == c) members.push_back(i);
    }
    if (members.size() < static_cast<std::size_t>(per_class)) {
      throw Error(Errc::degenerate_training,
                  "seed set: training pool lacks " + std::string(to_string(c)) + " pages");
    }
    for (int k = 0; k < per_class; ++k) {
      const std::size_t j = static_cast<std::size_t>(k) + uniform_index(rng, members.size() - static_cast<std::size_t>(k));
      std::swap(members[static_cast<std::size_t>(k)], members[j]);
      seed.push_back(members[static_cast<std::size_t>(k)]);
    }
  }
  std::sort(seed.begin(), seed.end());
  return seed;
}

// Train -> evaluate -> query -> oracle-label, until the pool is exhausted.
// `similarity` may be supplied when the caller already has the pool matrix.
inline LearningCurve run_active_learning(const ActiveLearningTask& task, Strategy strategy,
                                         const ExperimentConfig& config, Rng& rng,
                                         const SimilarityMatrix* similarity = nullptr) {
  LearningCurve curve;
  curve.strategy = strategy;
  if (task.pool.size() != task.pool_labels.size() || task.test.size() != task.test_labels.size()) {
    throw Error(Errc::shape, "run_active_learning: features and labels differ in length");
  }
  if (config.batch_size < 1) throw Error(Errc::configuration, "batch_size must be >= 1");

  std::optional<SimilarityMatrix> own;
  if (!similarity) {
    own = similarity_matrix(task.pool, config.llp.sigma);
    similarity = &*own;
  }
  const Eigen::MatrixXd features = stack_features(task.pool);

  std::vector<std::size_t> labeled = draw_seed_set(task.pool_labels, config.seed_per_class, rng);
  std::vector<std::size_t> unlabeled;
  {
    std::vector<bool> is_labeled(task.pool.size(), false);
    for (auto i : labeled) is_labeled[i] = true;
    for (std::size_t i = 0; i < task.pool.size(); ++i) {
      if (!is_labeled[i]) unlabeled.push_back(i);
    }
  }

  LlpOptions llp = config.llp;
  llp.record_history = false;
  try {
    while (true) {
      PartialLabels partial(task.pool.size());
      for (auto i : labeled) partial[i] = task.pool_labels[i];
      const LlpModel model = train_llp(features, partial, *similarity, llp);
      curve.points.push_back(evaluate_model(model, task.test, task.test_labels, labeled.size()));
      if (unlabeled.empty()) break;

      const QueryBatch batch =
          select_batch(strategy, model, task.pool, unlabeled, labeled, *similarity, config.batch_size, rng);
      std::vector<std::size_t> picked = batch.indices();
      std::sort(picked.begin(), picked.end());
      labeled.insert(labeled.end(), picked.begin(), picked.end());
      std::sort(labeled.begin(), labeled.end());
      std::vector<std::size_t> remaining;
      std::set_difference(unlabeled.begin(), unlabeled.end(), picked.begin(), picked.end(),
                          std::back_inserter(remaining));
      unlabeled = std::move(remaining);
    }
  } catch (const Error& e) {
    curve.aborted = e.what();
  }
  return curve;
}

// Trapezoidal area under accuracy-vs-labels, divided by the label range.
inline double normalized_auc(const LearningCurve& curve) {
  const auto& pts = curve.points;
  if (pts.size() < 2) throw Error(Errc::insufficient_data, "normalized_auc: need at least two curve points");
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double dx = static_cast<double>(pts[i].labeled_count) - static_cast<double>(pts[i - 1].labeled_count);
    area += dx * (pts[i].accuracy + pts[i - 1].accuracy) / 2.0;
  }
  const double span =
      static_cast<double>(pts.back().labeled_count) - static_cast<double>(pts.front().labeled_count);
  if (span <= 0.0) throw Error(Errc::insufficient_data, "normalized_auc: labeled counts do not increase");
  return area / span;
}

struct MeanCurvePoint {
  std::size_t labeled_count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single curve
  std::size_t n = 0;
};

struct RepeatedResult {
  Strategy strategy = Strategy::random;
  std::vector<LearningCurve> curves;
  std::vector<double> aucs;  // aligned with curves
  std::vector<MeanCurvePoint> mean_curve;
  double mean_auc = 0.0;
  double std_auc = 0.0;
};

inline double sample_stddev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

inline RepeatedResult summarize_curves(Strategy strategy, std::vector<LearningCurve> curves) {
  RepeatedResult result;
  result.strategy = strategy;
  std::map<std::size_t, std::vector<double>> by_count;
  for (const auto& curve : curves) {
    for (const auto& pt : curve.points) by_count[pt.labeled_count].push_back(pt.accuracy);
    result.aucs.push_back(curve.points.size() >= 2 ? normalized_auc(curve) : std::nan(""));
  }
  for (const auto& [count, accs] : by_count) {
    MeanCurvePoint mp;
    mp.labeled_count = count;
    mp.n = accs.size();
    mp.mean = std::accumulate(accs.begin(), accs.end(), 0.0) / static_cast<double>(accs.size());
    mp.stddev = sample_stddev(accs);
    result.mean_curve.push_back(mp);
  }
  if (!result.aucs.empty()) {
    result.mean_auc = std::accumulate(result.aucs.begin(), result.aucs.end(), 0.0) /
                      static_cast<double>(result.aucs.size());
    result.std_auc = sample_stddev(result.aucs);
  }
  result.curves = std::move(curves);
  return result;
}

inline std::uint64_t repetition_seed(std::uint64_t base_seed, int repetition) {
  return mix_seed(base_seed, static_cast<std::uint64_t>(repetition));
}

// One repetition: fresh stratified split and seed set from the repetition's
// own stream. The same repetition index gives the same split and seed set for
// every strategy, which makes repetitions paired across strategies.
inline LearningCurve run_repetition(const BofDataset& data, Strategy strategy, const ExperimentConfig& config,
                                    std::uint64_t rep_seed) {
  for (const auto& l : data.labels) {
    if (!l) throw Error(Errc::configuration, "simulation needs a fully labeled dataset (the oracle)");
  }
  Rng rng(rep_seed);
  const Split split = split_dataset(data.labels, config.test_per_class, rng);
  ActiveLearningTask task;
  for (auto i : split.train) {
    task.pool.push_back(data.bofs[i]);
    task.pool_labels.push_back(*data.labels[i]);
  }
  for (auto i : split.test) {
    task.test.push_back(data.bofs[i]);
    task.test_labels.push_back(*data.labels[i]);
  }
  LearningCurve curve = run_active_learning(task, strategy, config, rng);
  curve.seed = rep_seed;
  return curve;
}

inline RepeatedResult repeat_experiment(const BofDataset& data, const ExperimentConfig& config, Strategy strategy,
                                        std::span<const std::uint64_t> seeds = {}) {
  if (config.repetitions < 1 && seeds.empty()) throw Error(Errc::configuration, "repetitions must be >= 1");
  std::vector<std::uint64_t> rep_seeds(seeds.begin(), seeds.end());
  if (rep_seeds.empty()) {
    for (int r = 0; r < config.repetitions; ++r) rep_seeds.push_back(repetition_seed(config.seed, r));
  }
  std::vector<LearningCurve> curves;
  for (auto s : rep_seeds) curves.push_back(run_repetition(data, strategy, config, s));
  return summarize_curves(strategy, std::move(curves));
}

// Every configured strategy, each over config.repetitions seeds. Runs are
// independent and land in fixed slots, so the result does not depend on jobs.
inline std::vector<RepeatedResult> run_experiments(const BofDataset& data, const ExperimentConfig& config,
                                                   int jobs = 1) {
  if (config.repetitions < 1) throw Error(Errc::configuration, "repetitions must be >= 1");
  const std::size_t reps = static_cast<std::size_t>(config.repetitions);
  const std::size_t total = config.strategies.size() * reps;
  std::vector<std::vector<LearningCurve>> curves(config.strategies.size(), std::vector<LearningCurve>(reps));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t j = next++; j < total; j = next++) {
      try {
        const std::size_t s = j / reps;
        const std::size_t r = j % reps;
        curves[s][r] = run_repetition(data, config.strategies[s], config,
                                      repetition_seed(config.seed, static_cast<int>(r)));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int threads_wanted = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(total, 1)));
  if (threads_wanted == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < threads_wanted; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<RepeatedResult> results;
  for (std::size_t s = 0; s < config.strategies.size(); ++s) {
    results.push_back(summarize_curves(config.strategies[s], std::move(curves[s])));
  }
  return results;
}

// One-sided exact sign test: P(X >= wins) for X ~ Binomial(n, 1/2), where n
// counts the non-tied pairs.
struct SignTest {
  int wins = 0;
  int losses = 0;
  int ties = 0;
  double p_value = 1.0;
};

inline SignTest sign_test_greater(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::shape, "sign test: samples must be paired");
  SignTest t;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) ++t.wins;
    else if (a[i] < b[i]) ++t.losses;
    else ++t.ties;
  }
  const int n = t.wins + t.losses;
  double p = 0.0;
  for (int k = t.wins; k <= n; ++k) {
    double log_choose = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    p += std::exp(log_choose - n * std::log(2.0));
  }
  t.p_value = n == 0 ? 1.0 : std::min(1.0, p);
  return t;
}

// ---------------------------------------------------------------------------
// Word-level cross-validation

struct BinaryLogistic {
  Eigen::VectorXd weights;  // last entry is the bias
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  double probability(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd z = (x - mean).cwiseQuotient(scale);
    const double logit = weights.head(z.size()).dot(z) + weights(z.size());
    return 1.0 / (1.0 + std::exp(-logit));
  }
};

// Newton-Raphson on the ridge-penalized log-loss over standardized inputs.
inline BinaryLogistic fit_binary_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge = 1e-4,
                                          int max_iterations = 100) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  BinaryLogistic model;
  model.mean = x.colwise().mean().transpose();
  model.scale = ((x.rowwise() - model.mean.transpose()).array().square().colwise().sum() / static_cast<double>(n))
                    .sqrt()
                    .transpose();
  for (Eigen::Index k = 0; k < d; ++k) {
    if (!(model.scale(k) > 0.0)) model.scale(k) = 1.0;
  }
  Eigen::MatrixXd z(n, d + 1);
  z.leftCols(d) = (x.rowwise() - model.mean.transpose()).array().rowwise() / model.scale.transpose().array();
  z.col(d).setOnes();

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d + 1);
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(d + 1, ridge);
  penalty(d) = 0.0;
  auto loss = [&](const Eigen::VectorXd& v) {
    const Eigen::VectorXd logits = z * v;
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = logits(i);
      // log(1 + e^t) - y t, written to avoid overflow
      total += (t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t))) - y(i) * t;
    }
    return total + 0.5 * (penalty.array() * v.array().square()).sum();
  };
  double current = loss(w);
  for (int iter = 0; iter < max_iterations; ++iter) {
    const Eigen::VectorXd p = (1.0 + (-(z * w).array()).exp()).inverse().matrix();
    const Eigen::VectorXd grad = z.transpose() * (p - y) + penalty.cwiseProduct(w);
    if (grad.norm() < 1e-9) break;
    const Eigen::VectorXd weights_diag = (p.array() * (1.0 - p.array())).matrix();
    Eigen::MatrixXd hessian = z.transpose() * weights_diag.asDiagonal() * z;
    hessian.diagonal() += penalty + Eigen::VectorXd::Constant(d + 1, 1e-10);
    const Eigen::VectorXd delta = hessian.ldlt().solve(grad);
    double t = 1.0;
    Eigen::VectorXd next = w - delta;
    double next_loss = loss(next);
    while (next_loss > current && t > 1e-8) {
      t *= 0.5;
      next = w - t * delta;
      next_loss = loss(next);
    }
    if (next_loss > current) break;
    const bool converged = current - next_loss < 1e-12 * (1.0 + std::abs(current));
    w = next;
    current = next_loss;
    if (converged) break;
  }
  model.weights = w;
  return model;
}

// Threshold on predicted probability that maximizes accuracy on (scores, y).
inline double best_threshold(const std::vector<double>& scores, const Eigen::VectorXd& y) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Threshold below everything: all predicted positive.
  long correct = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) correct += y(i) > 0.5;
  long best = correct;
  double threshold = scores.empty() ? 0.5 : scores[order.front()] - 1e-12;
  for (std::size_t k = 0; k < order.size(); ++k) {
    // Move order[k] to the negative side.
    correct += y(static_cast<Eigen::Index>(order[k])) > 0.5 ? -1 : 1;
    if (k + 1 < order.size() && scores[order[k + 1]] == scores[order[k]]) continue;
    if (correct > best) {
      best = correct;
      threshold = k + 1 < order.size() ? 0.5 * (scores[order[k]] + scores[order[k + 1]]) : scores[order[k]] + 1e-12;
    }
  }
  return threshold;
}

// Stratified k-fold CV of Blackletter-vs-Roman word classification on a
// feature subset; the decision threshold is tuned on each training split.
inline double word_level_cv(std::span<const WordFeatureVector> features, std::span<const Label> labels,
                            FeatureSubset subset, std::uint64_t seed = 0, int folds = 5) {
  if (features.size() != labels.size()) throw Error(Errc::shape, "word_level_cv: one label per word required");
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == Label::mixed) throw Error(Errc::validation, "word_level_cv: word labels must be Blackletter or Roman");
    by_class[labels[i] == Label::blackletter ? 0 : 1].push_back(i);
  }
  if (by_class[0].empty() || by_class[1].empty()) {
    throw Error(Errc::degenerate_training, "word_level_cv: both Blackletter and Roman words are required");
  }
  if (by_class[0].size() < 10 || by_class[1].size() < 10) {
    throw Error(Errc::insufficient_data, "word_level_cv: at least 10 words per class required");
  }
  const auto cols = feature_columns(subset);
  Rng rng(seed);
  std::vector<int> fold_of(features.size(), 0);
  for (auto& members : by_class) {
    shuffle(members, rng);
    for (std::size_t k = 0; k < members.size(); ++k) fold_of[members[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
  }

  auto row = [&](std::size_t i) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) v(static_cast<Eigen::Index>(c)) = features[i][cols[c]];
    return v;
  };

  double total = 0.0;
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    for (std::size_t i = 0; i < features.size(); ++i) (fold_of[i] == f ? test : train).push_back(i);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(train.size()), static_cast<Eigen::Index>(cols.size()));
    Eigen::VectorXd y(static_cast<Eigen::Index>(train.size()));
    for (std::size_t k = 0; k < train.size(); ++k) {
      x.row(static_cast<Eigen::Index>(k)) = row(train[k]).transpose();
      y(static_cast<Eigen::Index>(k)) = labels[train[k]] == Label::blackletter ? 1.0 : 0.0;
    }
    const BinaryLogistic model = fit_binary_logistic(x, y);
    std::vector<double> train_scores;
    for (std::size_t k = 0; k < train.size(); ++k) train_scores.push_back(model.probability(row(train[k])));
    const double threshold = best_threshold(train_scores, y);
    std::size_t correct = 0;
    for (auto i : test) {
      const bool positive = model.probability(row(i)) > threshold;
      correct += positive == (labels[i] == Label::blackletter);
    }
    total += static_cast<double>(correct) / static_cast<double>(test.size());
  }
  return total / folds;
}

// ---------------------------------------------------------------------------
// PCA

struct PcaResult {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;   // 2 x d, unit rows
  Eigen::VectorXd eigenvalues;  // all of them, descending (covariance normalized by n)
  Eigen::MatrixXd coords;       // n x 2
};

inline PcaResult pca_projection(std::span<const BofVector> bofs) {
  if (bofs.size() < 3) throw Error(Errc::insufficient_data, "pca: need at least 3 pages");
  const Eigen::MatrixXd x = stack_features(bofs);
  if (x.cols() < 2) throw Error(Errc::shape, "pca: need at least 2 dimensions");
  PcaResult r;
  r.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - r.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const Eigen::Index d = x.cols();
  r.eigenvalues = solver.eigenvalues().reverse();
  r.components.resize(2, d);
  for (Eigen::Index k = 0; k < 2; ++k) {
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - k);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    r.components.row(k) = v.transpose();
  }
  r.coords = centered * r.components.transpose();
  return r;
}

}  // namespace fontid
