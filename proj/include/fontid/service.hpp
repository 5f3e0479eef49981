#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fontid/dataset.hpp"
#include "fontid/error.hpp"
#include "fontid/harness.hpp"
#include "fontid/image_io.hpp"
#include "fontid/imgproc.hpp"
#include "fontid/llp.hpp"
#include "fontid/sampler.hpp"

// After Eigen: httplib pulls in <resolv.h>, whose `_res` macro collides with
// Eigen parameter names.
#include <httplib.h>

namespace fontid {

inline constexpr int kThumbnailHeight = 256;

struct ServiceOptions {
  LlpOptions llp;
  int batch_size = kDefaultBatchSize;
  Strategy strategy = Strategy::s5;
  std::uint64_t seed = 0;
  int eval_holdout_per_class = 0;    // labeled pages per class kept out of the pool for live accuracy
  std::filesystem::path event_log;   // empty: in-memory only
  std::filesystem::path image_root;  // base for relative image paths
};

struct MetricsPoint {
  int round = 0;
  std::size_t labeled_count = 0;
  std::optional<double> accuracy;
  std::array<std::size_t, kNumClasses> label_counts{};
  std::size_t unlabeled_count = 0;
};

// Immutable; readers hold a shared_ptr while writers publish a new one.
struct SessionSnapshot {
  int round = 0;
  std::vector<MetricsPoint> points;
  std::size_t labeled = 0;
  std::size_t unlabeled = 0;
  std::size_t pending = 0;
  std::shared_ptr<const LlpModel> model;
};

struct AuditEntry {
  std::string page_id;
  Label previous;
  Label replacement;
  std::string annotator;
  std::string timestamp;
};

struct LabelSubmission {
  std::string page_id;
  Label label = Label::blackletter;
  std::string annotator;
  std::string timestamp;
};

class LabelingService {
 public:
  // `pages` is the pool plus any held-out evaluation pages; labels on it act
  // as ground truth for evaluation and for the simulated seed set.
  // `image_paths` maps page ids to page images for thumbnails (optional).
  LabelingService(BofDataset pages, std::map<std::string, std::string> image_paths, ServiceOptions options)
      : options_(std::move(options)), image_paths_(std::move(image_paths)) {
    if (pages.size() == 0) throw Error(Errc::configuration, "service: dataset has no pages");
    for (std::size_t i = 0; i < pages.size(); ++i) {
      if (!page_index_.emplace(pages.page_ids[i], i).second) {
        throw Error(Errc::validation, "service: duplicate page id " + pages.page_ids[i]);
      }
    }
    // Hold out evaluation pages: the first N labeled pages of each class in dataset order.
    std::array<int, kNumClasses> taken{};
    std::vector<bool> held(pages.size(), false);
    for (std::size_t i = 0; i < pages.size(); ++i) {
      if (!pages.labels[i]) continue;
      auto& t = taken[static_cast<std::size_t>(index_of(*pages.labels[i]))];
      if (t < options_.eval_holdout_per_class) {
        ++t;
        held[i] = true;
      }
    }
    for (std::size_t i = 0; i < pages.size(); ++i) {
      if (held[i]) {
        eval_x_.push_back(pages.bofs[i]);
        eval_y_.push_back(*pages.labels[i]);
      } else {
        pool_node_.emplace(pages.page_ids[i], pool_.size());
        pool_.push_back(pages.bofs[i]);
        pool_ids_.push_back(pages.page_ids[i]);
        pool_truth_.push_back(pages.labels[i]);
      }
    }
    all_ = std::move(pages);
    if (pool_.empty()) throw Error(Errc::configuration, "service: evaluation holdout consumed the whole pool");
    similarity_ = std::make_unique<SimilarityMatrix>(similarity_matrix(pool_, options_.llp.sigma));
    features_ = stack_features(pool_);
    if (!options_.event_log.empty()) replay(options_.event_log);
  }

  LabelingService(const LabelingService&) = delete;
  LabelingService& operator=(const LabelingService&) = delete;

  // Body fields (all optional): strategy, batch_size, seed, seed_labels {page_id: label}.
  nlohmann::json create_session(const nlohmann::json& request) {
    nlohmann::json event = normalize_create(request);
    std::string id;
    {
      std::lock_guard lock(sessions_mutex_);
      id = "s" + std::to_string(next_session_++);
    }
    event["type"] = "session_created";
    event["session"] = id;
    auto session = build_session(event);
    append_event(event);
    {
      std::lock_guard lock(sessions_mutex_);
      sessions_.emplace(id, session);
    }
    return session_summary(*session);
  }

  nlohmann::json get_batch(const std::string& id) {
    auto session = find(id);
    std::lock_guard writer(session->writer);
    if (session->unlabeled.empty()) {
      return {{"session", id}, {"status", "pool_exhausted"}, {"round", session->round}, {"pages", nlohmann::json::array()}};
    }
    if (session->pending.empty()) {
      issue_batch(*session);
      append_event({{"type", "batch_issued"}, {"session", id}, {"round", session->round}, {"pages", pending_ids(*session)}});
      publish(*session);
    }
    nlohmann::json pages = nlohmann::json::array();
    for (const auto& pick : session->pending) {
      const auto& sc = pick.scores;
      nlohmann::json scores = {{"uncertainty", sc.uncertainty}, {"total", sc.total}};
      scores["dissimilarity"] = sc.dissimilarity ? nlohmann::json(*sc.dissimilarity) : nlohmann::json(nullptr);
      scores["diversity"] = sc.diversity ? nlohmann::json(*sc.diversity) : nlohmann::json(nullptr);
      const std::string& pid = pool_ids_[pick.index];
      nlohmann::json entry = {{"page_id", pid}, {"thumbnail_url", "/pages/" + pid + "/thumbnail"}, {"scores", scores}};
      if (auto it = session->partial.find(pick.index); it != session->partial.end()) {
        entry["submitted_label"] = std::string(to_string(it->second.label));
      }
      pages.push_back(std::move(entry));
    }
    return {{"session", id}, {"status", "pending"}, {"round", session->round}, {"strategy", to_string(session->strategy)},
            {"pages", pages}};
  }

  // Body: {"labels": [{"page_id", "label", "annotator"?, "timestamp"?}, ...]}.
  nlohmann::json submit_labels(const std::string& id, const nlohmann::json& request) {
    auto session = find(id);
    const std::vector<LabelSubmission> subs = parse_submissions(request);
    std::lock_guard writer(session->writer);
    nlohmann::json event = {{"type", "labels"}, {"session", id}, {"labels", nlohmann::json::array()}};
    for (const auto& s : subs) {
      event["labels"].push_back({{"page_id", s.page_id},
                                 {"label", std::string(to_string(s.label))},
                                 {"annotator", s.annotator},
                                 {"timestamp", s.timestamp}});
    }
    nlohmann::json summary = apply_labels(*session, subs);
    append_event(event);
    return summary;
  }

  std::shared_ptr<const SessionSnapshot> snapshot(const std::string& id) const {
    auto session = find(id);
    std::lock_guard lock(session->snapshot_mutex);
    return session->snapshot;
  }

  nlohmann::json get_metrics(const std::string& id) const {
    const auto snap = snapshot(id);
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : snap->points) points.push_back(point_json(p));
    nlohmann::json counts = nlohmann::json::object();
    if (!snap->points.empty()) {
      for (Label c : kAllLabels) {
        counts[std::string(to_string(c))] = snap->points.back().label_counts[static_cast<std::size_t>(index_of(c))];
      }
    }
    return {{"session", id},       {"round", snap->round},         {"points", points},
            {"label_counts", counts}, {"labeled", snap->labeled}, {"unlabeled", snap->unlabeled},
            {"pending", snap->pending}};
  }

  std::vector<AuditEntry> audit_log(const std::string& id) const {
    auto session = find(id);
    std::lock_guard writer(session->writer);
    return session->audit;
  }

  // PNG bytes at 256 px height. Pages without an image get a histogram
  // rendering of their BoF so synthetic datasets still have something to show.
  std::shared_ptr<const std::vector<std::uint8_t>> thumbnail(const std::string& page_id) {
    {
      std::lock_guard lock(thumb_mutex_);
      if (auto it = thumbs_.find(page_id); it != thumbs_.end()) return it->second;
    }
    auto idx = page_index_.find(page_id);
    if (idx == page_index_.end()) throw Error(Errc::not_found, "unknown page " + page_id);
    GrayImage img;
    if (auto p = image_paths_.find(page_id); p != image_paths_.end() && !p->second.empty()) {
      std::filesystem::path path(p->second);
      if (path.is_relative() && !options_.image_root.empty()) path = options_.image_root / path;
      img = normalize_height(load_image(path.string()), kThumbnailHeight);
    } else {
      img = render_histogram(all_.bofs[idx->second]);
    }
    auto png = std::make_shared<const std::vector<std::uint8_t>>(encode_png(img));
    std::lock_guard lock(thumb_mutex_);
    return thumbs_.emplace(page_id, png).first->second;
  }

  std::size_t pool_size() const noexcept { return pool_.size(); }

 private:
  struct Session {
    std::string id;
    Strategy strategy = Strategy::s5;
    int batch_size = kDefaultBatchSize;
    std::uint64_t seed = 0;
    int round = 0;
    std::map<std::size_t, Label> labeled;  // pool node -> label
    std::set<std::size_t> unlabeled;
    std::vector<QueryPick> pending;
    std::map<std::size_t, LabelSubmission> partial;
    std::vector<AuditEntry> audit;
    std::vector<MetricsPoint> points;
    std::shared_ptr<const LlpModel> model;

    mutable std::mutex writer;
    mutable std::mutex snapshot_mutex;
    std::shared_ptr<const SessionSnapshot> snapshot;
  };

  static std::string now_iso() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  std::shared_ptr<Session> find(const std::string& id) const {
    std::lock_guard lock(sessions_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(Errc::not_found, "unknown session " + id);
    return it->second;
  }

  nlohmann::json normalize_create(const nlohmann::json& request) const {
    if (!request.is_object()) throw Error(Errc::validation, "session request must be a JSON object");
    nlohmann::json e;
    Strategy strategy = options_.strategy;
    if (request.contains("strategy")) {
      if (!request["strategy"].is_string()) throw Error(Errc::validation, "strategy must be a string");
      const auto name = request["strategy"].get<std::string>();
      const auto parsed = try_parse_strategy(name);
      if (!parsed) {
        throw Error(Errc::validation, "unknown strategy '" + name + "'; expected one of S1, S2, S3, S4, S5, S6, Random");
      }
      strategy = *parsed;
    }
    int batch_size = options_.batch_size;
    if (request.contains("batch_size")) {
      if (!request["batch_size"].is_number_integer() || request["batch_size"].get<int>() < 1) {
        throw Error(Errc::validation, "batch_size must be an integer >= 1");
      }
      batch_size = request["batch_size"].get<int>();
    }
    std::uint64_t seed = options_.seed;
    if (request.contains("seed")) {
      const auto& v = request["seed"];
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw Error(Errc::validation, "seed must be a non-negative integer");
      }
      seed = request["seed"].get<std::uint64_t>();
    }
    nlohmann::json seed_labels = nlohmann::json::object();
    if (request.contains("seed_labels")) {
      if (!request["seed_labels"].is_object()) throw Error(Errc::validation, "seed_labels must map page ids to labels");
      for (const auto& [pid, lab] : request["seed_labels"].items()) {
        if (!pool_node_.count(pid)) throw Error(Errc::validation, "seed_labels: page " + pid + " is not in the pool");
        if (!lab.is_string()) throw Error(Errc::validation, "seed_labels: label for " + pid + " must be a string");
        seed_labels[pid] = std::string(to_string(parse_label(lab.get<std::string>())));
      }
    } else {
      // Simulated seed: one known-label page per class, drawn with the session seed.
      std::vector<Label> truth;
      std::vector<std::size_t> known;
      for (std::size_t i = 0; i < pool_.size(); ++i) {
        if (pool_truth_[i]) {
          known.push_back(i);
          truth.push_back(*pool_truth_[i]);
        }
      }
      Rng rng(mix_seed(seed, 0x5eed));
      for (auto k : draw_seed_set(truth, 1, rng)) {
        seed_labels[pool_ids_[known[k]]] = std::string(to_string(truth[k]));
      }
    }
    e["strategy"] = std::string(to_string(strategy));
    e["batch_size"] = batch_size;
    e["seed"] = seed;
    e["seed_labels"] = seed_labels;
    return e;
  }

  std::shared_ptr<Session> build_session(const nlohmann::json& event) {
    auto s = std::make_shared<Session>();
    s->id = event.at("session").get<std::string>();
    s->strategy = parse_strategy(event.at("strategy").get<std::string>());
    s->batch_size = event.at("batch_size").get<int>();
    s->seed = event.at("seed").get<std::uint64_t>();
    for (std::size_t i = 0; i < pool_.size(); ++i) s->unlabeled.insert(i);
    for (const auto& [pid, lab] : event.at("seed_labels").items()) {
      const std::size_t node = pool_node_.at(pid);
      s->labeled[node] = parse_label(lab.get<std::string>());
      s->unlabeled.erase(node);
    }
    retrain(*s);
    publish(*s);
    return s;
  }

  void retrain(Session& s) {
    PartialLabels partial(pool_.size());
    for (const auto& [node, lab] : s.labeled) partial[node] = lab;
    LlpOptions llp = options_.llp;
    llp.record_history = false;
    s.model = std::make_shared<const LlpModel>(train_llp(features_, partial, *similarity_, llp));
    MetricsPoint p;
    p.round = s.round;
    p.labeled_count = s.labeled.size();
    p.unlabeled_count = s.unlabeled.size();
    for (const auto& [node, lab] : s.labeled) ++p.label_counts[static_cast<std::size_t>(index_of(lab))];
    if (!eval_x_.empty()) p.accuracy = evaluate_model(*s.model, eval_x_, eval_y_, s.labeled.size()).accuracy;
    s.points.push_back(p);
  }

  void publish(Session& s) {
    auto snap = std::make_shared<SessionSnapshot>();
    snap->round = s.round;
    snap->points = s.points;
    snap->labeled = s.labeled.size();
    snap->unlabeled = s.unlabeled.size();
    snap->pending = s.pending.size();
    snap->model = s.model;
    std::lock_guard lock(s.snapshot_mutex);
    s.snapshot = std::move(snap);
  }

  void issue_batch(Session& s) {
    std::vector<std::size_t> unlabeled(s.unlabeled.begin(), s.unlabeled.end());
    std::vector<std::size_t> labeled;
    for (const auto& [node, _] : s.labeled) labeled.push_back(node);
    Rng rng(mix_seed(s.seed, static_cast<std::uint64_t>(s.round) + 1));
    s.pending = select_batch(s.strategy, *s.model, pool_, unlabeled, labeled, *similarity_, s.batch_size, rng).picks;
  }

  std::vector<std::string> pending_ids(const Session& s) const {
    std::vector<std::string> ids;
    for (const auto& p : s.pending) ids.push_back(pool_ids_[p.index]);
    return ids;
  }

  static std::vector<LabelSubmission> parse_submissions(const nlohmann::json& request) {
    if (!request.is_object() || !request.contains("labels") || !request["labels"].is_array()) {
      throw Error(Errc::validation, "body must be {\"labels\": [...]}");
    }
    std::vector<LabelSubmission> subs;
    for (std::size_t i = 0; i < request["labels"].size(); ++i) {
      const auto& item = request["labels"][i];
      const std::string where = "labels[" + std::to_string(i) + "]";
      if (!item.is_object() || !item.contains("page_id") || !item["page_id"].is_string()) {
        throw Error(Errc::validation, where + ".page_id: required string");
      }
      if (!item.contains("label") || !item["label"].is_string()) {
        throw Error(Errc::validation, where + ".label: required string");
      }
      LabelSubmission s;
      s.page_id = item["page_id"].get<std::string>();
      auto label = try_parse_label(item["label"].get<std::string>());
      if (!label) {
        throw Error(Errc::validation, where + ".label: '" + item["label"].get<std::string>() +
                                          "' is not one of Blackletter, Roman, Mixed");
      }
      s.label = *label;
      s.annotator = item.value("annotator", std::string());
      s.timestamp = item.value("timestamp", now_iso());
      subs.push_back(std::move(s));
    }
    return subs;
  }

  // Whole request is validated before anything changes.
  nlohmann::json apply_labels(Session& s, const std::vector<LabelSubmission>& subs) {
    std::set<std::size_t> pending_nodes;
    for (const auto& p : s.pending) pending_nodes.insert(p.index);
    std::vector<std::string> rejected;
    for (const auto& sub : subs) {
      auto it = pool_node_.find(sub.page_id);
      if (it == pool_node_.end()) {
        rejected.push_back(sub.page_id);
        continue;
      }
      if (pending_nodes.count(it->second)) continue;
      // A replay of an already-applied label (e.g. a retry after a dropped
      // response) is accepted as a no-op; anything else is rejected.
      auto done = s.labeled.find(it->second);
      if (done == s.labeled.end() || done->second != sub.label) rejected.push_back(sub.page_id);
    }
    if (!rejected.empty()) {
      std::string msg = "pages not in the pending batch:";
      for (const auto& r : rejected) msg += " " + r;
      throw Error(Errc::validation, msg);
    }

    nlohmann::json echo = nlohmann::json::array();
    std::size_t duplicates = 0;
    for (const auto& sub : subs) {
      const std::size_t node = pool_node_.at(sub.page_id);
      if (!pending_nodes.count(node)) {
        ++duplicates;
        continue;
      }
      if (auto prev = s.partial.find(node); prev != s.partial.end()) {
        s.audit.push_back({sub.page_id, prev->second.label, sub.label, sub.annotator, sub.timestamp});
      }
      s.partial[node] = sub;
      echo.push_back({{"page_id", sub.page_id}, {"label", std::string(to_string(sub.label))}});
    }

    nlohmann::json summary = {{"session", s.id}, {"echo", echo}, {"duplicates_ignored", duplicates}};
    if (s.pending.empty() || s.partial.size() < s.pending.size()) {
      summary["status"] = s.pending.empty() ? "no_pending_batch" : "partial";
      summary["round"] = s.round;
      summary["remaining"] = s.pending.size() - s.partial.size();
      return summary;
    }

    for (const auto& [node, sub] : s.partial) {
      s.labeled[node] = sub.label;
      s.unlabeled.erase(node);
    }
    s.partial.clear();
    s.pending.clear();
    ++s.round;
    retrain(s);
    publish(s);
    summary["status"] = "complete";
    summary["round"] = s.round;
    summary["remaining"] = 0;
    summary["point"] = point_json(s.points.back());
    summary["pool_exhausted"] = s.unlabeled.empty();
    return summary;
  }

  static nlohmann::json point_json(const MetricsPoint& p) {
    nlohmann::json counts = nlohmann::json::object();
    for (Label c : kAllLabels) counts[std::string(to_string(c))] = p.label_counts[static_cast<std::size_t>(index_of(c))];
    return {{"round", p.round},
            {"labeled_count", p.labeled_count},
            {"accuracy", p.accuracy ? nlohmann::json(*p.accuracy) : nlohmann::json(nullptr)},
            {"label_counts", counts},
            {"unlabeled_count", p.unlabeled_count}};
  }

  nlohmann::json session_summary(const Session& s) const {
    return {{"session_id", s.id},
            {"strategy", to_string(s.strategy)},
            {"batch_size", s.batch_size},
            {"seed", s.seed},
            {"round", s.round},
            {"labeled", s.labeled.size()},
            {"unlabeled", s.unlabeled.size()},
            {"point", point_json(s.points.back())}};
  }

  static GrayImage render_histogram(const BofVector& bof) {
    const int bins = static_cast<int>(bof.size());
    const int bar = 8;
    GrayImage img(std::max(1, bins * bar), kThumbnailHeight, 255);
    double peak = 0.0;
    for (double v : bof.bins) peak = std::max(peak, v);
    for (int b = 0; b < bins; ++b) {
      const int h = peak > 0 ? static_cast<int>(std::lround(bof.bins[static_cast<std::size_t>(b)] / peak *
                                                            (kThumbnailHeight - 8)))
                             : 0;
      for (int y = kThumbnailHeight - h; y < kThumbnailHeight; ++y) {
        for (int x = b * bar + 1; x < (b + 1) * bar - 1; ++x) img.at(x, y) = 40;
      }
    }
    return img;
  }

  void append_event(const nlohmann::json& event) {
    if (options_.event_log.empty() || replaying_) return;
    std::lock_guard lock(log_mutex_);
    std::ofstream out(options_.event_log, std::ios::app | std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot append to event log " + options_.event_log.string());
    out << event.dump() << "\n";
    out.flush();
  }

  // Rebuilds sessions from the log. Batches are recomputed rather than read
  // back: selection is deterministic in (session seed, round, labels).
  void replay(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return;
    replaying_ = true;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json e;
      try {
        e = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception&) {
        // A torn final line from a crash mid-write is dropped.
        if (in.peek() == EOF) break;
        replaying_ = false;
        throw Error(Errc::parse, path.string() + ":" + std::to_string(line_no) + ": malformed event");
      }
      const std::string type = e.value("type", "");
      if (type == "session_created") {
        auto s = build_session(e);
        const std::string id = s->id;
        sessions_.emplace(id, s);
        if (id.size() > 1 && id[0] == 's') next_session_ = std::max(next_session_, std::stoull(id.substr(1)) + 1);
      } else if (type == "batch_issued") {
        auto s = find(e.at("session").get<std::string>());
        if (s->pending.empty()) issue_batch(*s);
        if (pending_ids(*s) != e.at("pages").get<std::vector<std::string>>()) {
          replaying_ = false;
          throw Error(Errc::parse, path.string() + ":" + std::to_string(line_no) +
                                       ": recomputed batch differs from the logged batch");
        }
        publish(*s);
      } else if (type == "labels") {
        auto s = find(e.at("session").get<std::string>());
        apply_labels(*s, parse_submissions(e));
      }
    }
    replaying_ = false;
  }

  ServiceOptions options_;
  std::map<std::string, std::string> image_paths_;
  BofDataset all_;
  std::unordered_map<std::string, std::size_t> page_index_;
  std::unordered_map<std::string, std::size_t> pool_node_;
  std::vector<BofVector> pool_;
  std::vector<std::string> pool_ids_;
  std::vector<std::optional<Label>> pool_truth_;
  std::vector<BofVector> eval_x_;
  std::vector<Label> eval_y_;
  std::unique_ptr<SimilarityMatrix> similarity_;
  Eigen::MatrixXd features_;

  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  unsigned long long next_session_ = 1;

  std::mutex log_mutex_;
  bool replaying_ = false;

  std::mutex thumb_mutex_;
  std::map<std::string, std::shared_ptr<const std::vector<std::uint8_t>>> thumbs_;
};

// ---------------------------------------------------------------------------
// HTTP binding

inline int http_status(Errc code) {
  switch (code) {
    case Errc::not_found: return 404;
    case Errc::io:
    case Errc::degenerate_training: return 500;
    case Errc::empty_pool: return 409;
    default: return 400;
  }
}

inline void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  res.status = status;
  res.set_content(nlohmann::json{{"error", {{"code", code}, {"message", message}}}}.dump(), "application/json");
}

template <class Handler>
void guarded(httplib::Response& res, Handler&& handler) {
  try {
    handler();
  } catch (const Error& e) {
    send_error(res, http_status(e.code()), std::string(to_string(e.code())), e.what());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, 400, "parse", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

inline nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::parse, std::string("request body is not valid JSON: ") + e.what());
  }
}

inline void install_routes(httplib::Server& server, LabelingService& service) {
  auto reply = [](httplib::Response& res, const nlohmann::json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  server.Post("/sessions", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, service.create_session(parse_body(req)), 201); });
  });
  server.Get(R"(/sessions/([^/]+)/batch)", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, service.get_batch(req.matches[1])); });
  });
  server.Post(R"(/sessions/([^/]+)/labels)", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, service.submit_labels(req.matches[1], parse_body(req))); });
  });
  server.Get(R"(/sessions/([^/]+)/metrics)", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, service.get_metrics(req.matches[1])); });
  });
  server.Get(R"(/pages/([^/]+)/thumbnail)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto png = service.thumbnail(req.matches[1]);
      res.set_content(reinterpret_cast<const char*>(png->data()), png->size(), "image/png");
    });
  });
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send_error(res, res.status, "not_found", "no such endpoint");
  });
}

}  // namespace fontid
