#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fontid/error.hpp"
#include "fontid/llp.hpp"
#include "fontid/random.hpp"

namespace fontid {

enum class Strategy { s1, s2, s3, s4, s5, s6, random };

// Fixed presentation order (reports, legends).
inline constexpr std::array<Strategy, 7> kAllStrategies = {Strategy::s1, Strategy::s2, Strategy::s3, Strategy::s4,
                                                          Strategy::s5, Strategy::s6, Strategy::random};

inline constexpr int kDefaultBatchSize = 20;
inline constexpr int kDissimilarityNeighbors = 5;

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::s1: return "S1";
    case Strategy::s2: return "S2";
    case Strategy::s3: return "S3";
    case Strategy::s4: return "S4";
    case Strategy::s5: return "S5";
    case Strategy::s6: return "S6";
    case Strategy::random: return "Random";
  }
  return "?";
}

inline std::optional<Strategy> try_parse_strategy(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (Strategy s : kAllStrategies) {
    std::string name(to_string(s));
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (name == upper) return s;
  }
  return std::nullopt;
}

inline Strategy parse_strategy(std::string_view text) {
  if (auto s = try_parse_strategy(text)) return *s;
  throw Error(Errc::parameter,
              "unknown strategy '" + std::string(text) + "' (expected one of S1, S2, S3, S4, S5, S6, Random)");
}

inline bool uses_uncertainty(Strategy s) {
  return s == Strategy::s1 || s == Strategy::s3 || s == Strategy::s5 || s == Strategy::s6;
}
inline bool uses_dissimilarity(Strategy s) {
  return s == Strategy::s2 || s == Strategy::s3 || s == Strategy::s4 || s == Strategy::s6;
}
inline bool uses_diversity(Strategy s) { return s == Strategy::s4 || s == Strategy::s5 || s == Strategy::s6; }

// Shannon entropy in nats, 0 ln 0 = 0.
inline double entropy(const ClassPosterior& post) {
  double h = 0.0;
  for (double p : post.p) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::clamp(h, 0.0, std::log(static_cast<double>(kNumClasses)));
}

inline double uncertainty(const LlpModel& model, const BofVector& u) { return entropy(predict(model, u)); }

// Mean of (1 - S) over the (up to) five labeled instances most similar to u.
inline double dissimilarity(std::size_t u, std::span<const std::size_t> labeled, const SimilarityMatrix& s,
                            int neighbors = kDissimilarityNeighbors) {
  if (labeled.empty()) throw Error(Errc::insufficient_labels, "dissimilarity: labeled set is empty");
  std::vector<double> sims;
  sims.reserve(labeled.size());
  for (std::size_t l : labeled) sims.push_back(s(u, l));
  const std::size_t take = std::min(sims.size(), static_cast<std::size_t>(neighbors));
  std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(take), sims.end(), std::greater<>());
  double total = 0.0;
  for (std::size_t i = 0; i < take; ++i) total += 1.0 - sims[i];
  return total / static_cast<double>(take);
}

// min over current batch members of (1 - S).
inline double diversity_factor(std::size_t u, std::span<const std::size_t> batch, const SimilarityMatrix& s) {
  if (batch.empty()) throw Error(Errc::parameter, "diversity_factor: batch is empty");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t b : batch) best = std::min(best, 1.0 - s(u, b));
  return best;
}

struct ScoreBreakdown {
  double uncertainty = 0.0;
  std::optional<double> dissimilarity;
  std::optional<double> diversity;  // only for picks made after the batch seed
  double total = 0.0;
};

struct QueryPick {
  std::size_t index = 0;  // node index into the similarity matrix
  ScoreBreakdown scores;
};

struct QueryBatch {
  std::vector<QueryPick> picks;

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    for (const auto& p : picks) out.push_back(p.index);
    return out;
  }
  std::size_t size() const noexcept { return picks.size(); }
};

// `uncertainties[i]` belongs to `unlabeled[i]`. Ties are broken by the lower
// node index throughout.
inline QueryBatch select_batch(Strategy strategy, std::span<const std::size_t> unlabeled,
                               std::span<const std::size_t> labeled, std::span<const double> uncertainties,
                               const SimilarityMatrix& s, int batch_size, Rng& rng) {
  if (unlabeled.empty()) throw Error(Errc::empty_pool, "select_batch: unlabeled pool is empty");
  if (batch_size < 1) throw Error(Errc::parameter, "select_batch: batch size must be >= 1");
  if (uncertainties.size() != unlabeled.size()) {
    throw Error(Errc::shape, "select_batch: one uncertainty per unlabeled instance required");
  }
  if (uses_dissimilarity(strategy) && labeled.empty()) {
    throw Error(Errc::insufficient_labels, "select_batch: strategy needs at least one labeled instance");
  }

  // Candidates in ascending node order so that a strict comparison keeps the
  // lowest index on ties.
  std::vector<std::size_t> order(unlabeled.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return unlabeled[a] < unlabeled[b]; });

  std::vector<ScoreBreakdown> breakdown(unlabeled.size());
  std::vector<double> base(unlabeled.size(), 0.0);
  for (std::size_t i = 0; i < unlabeled.size(); ++i) {
    auto& sc = breakdown[i];
    sc.uncertainty = uncertainties[i];
    if (!labeled.empty()) sc.dissimilarity = dissimilarity(unlabeled[i], labeled, s);
    switch (strategy) {
      case Strategy::s1: base[i] = sc.uncertainty; break;
      case Strategy::s2: base[i] = *sc.dissimilarity; break;
      case Strategy::s3: base[i] = sc.uncertainty + *sc.dissimilarity; break;
      case Strategy::s4: base[i] = *sc.dissimilarity; break;
      case Strategy::s5: base[i] = sc.uncertainty; break;
      case Strategy::s6: base[i] = sc.uncertainty + *sc.dissimilarity; break;
      case Strategy::random: base[i] = 0.0; break;
    }
    sc.total = base[i];
  }

  const std::size_t want = std::min(unlabeled.size(), static_cast<std::size_t>(batch_size));
  QueryBatch batch;

  if (strategy == Strategy::random) {
    std::vector<std::size_t> pool = order;
    for (std::size_t k = 0; k < want; ++k) {
      const std::size_t j = k + uniform_index(rng, pool.size() - k);
      std::swap(pool[k], pool[j]);
      batch.picks.push_back({unlabeled[pool[k]], breakdown[pool[k]]});
    }
    return batch;
  }

  if (!uses_diversity(strategy)) {
    std::vector<std::size_t> ranked = order;
    std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) { return base[a] > base[b]; });
    for (std::size_t k = 0; k < want; ++k) batch.picks.push_back({unlabeled[ranked[k]], breakdown[ranked[k]]});
    return batch;
  }

  // Greedy construction: seed with the best base score, then repeatedly add
  // the candidate maximizing base + D', with D' taken against the batch so far.
  std::vector<bool> chosen(unlabeled.size(), false);
  std::vector<double> div(unlabeled.size(), std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < want; ++k) {
    std::size_t best = unlabeled.size();
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i : order) {
      if (chosen[i]) continue;
      const double score = k == 0 ? base[i] : base[i] + div[i];
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    chosen[best] = true;
    ScoreBreakdown sc = breakdown[best];
    if (k > 0) sc.diversity = div[best];
    sc.total = best_score;
    batch.picks.push_back({unlabeled[best], sc});
    for (std::size_t i = 0; i < unlabeled.size(); ++i) {
      if (!chosen[i]) div[i] = std::min(div[i], 1.0 - s(unlabeled[i], unlabeled[best]));
    }
  }
  return batch;
}

// Model-driven form: uncertainties come from the trained classifier applied to
// the pool features (rows indexed like the similarity matrix).
inline QueryBatch select_batch(Strategy strategy, const LlpModel& model, std::span<const BofVector> pool,
                               std::span<const std::size_t> unlabeled, std::span<const std::size_t> labeled,
                               const SimilarityMatrix& s, int batch_size, Rng& rng) {
  std::vector<double> h;
  h.reserve(unlabeled.size());
  for (std::size_t u : unlabeled) h.push_back(uncertainty(model, pool[u]));
  return select_batch(strategy, unlabeled, labeled, h, s, batch_size, rng);
}

}  // namespace fontid
