#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <thread>

#include "fontid/dataset.hpp"
#include "fontid/image_io.hpp"
#include "fontid/service.hpp"
#include "support.hpp"

using namespace fontid;
using nlohmann::json;

namespace {

BofDataset pool_of(int per_class, std::uint64_t seed = 4) {
  SyntheticSpec spec;
  spec.pages_per_class = {per_class, per_class, per_class};
  spec.bins = 8;
  spec.seed = seed;
  return make_synthetic_dataset(spec);
}

ServiceOptions fast_options() {
  ServiceOptions o;
  o.llp.sigma = 0.3;
  o.llp.max_iterations = 150;
  o.seed = 5;
  return o;
}

std::map<std::string, Label> truth_of(const BofDataset& d) {
  std::map<std::string, Label> out;
  for (std::size_t i = 0; i < d.size(); ++i) out[d.page_ids[i]] = *d.labels[i];
  return out;
}

std::vector<std::string> batch_ids(const json& batch) {
  std::vector<std::string> ids;
  for (const auto& p : batch["pages"]) ids.push_back(p["page_id"].get<std::string>());
  return ids;
}

json labels_body(const std::vector<std::string>& ids, const std::map<std::string, Label>& truth,
                 const std::string& annotator = "ann") {
  json body = {{"labels", json::array()}};
  for (const auto& id : ids) {
    body["labels"].push_back({{"page_id", id}, {"label", to_string(truth.at(id))}, {"annotator", annotator}});
  }
  return body;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::io;
}

}  // namespace

TEST(Service, FreshSessionHasSeedOnlyPoint) {
  LabelingService svc(pool_of(10), {}, fast_options());
  const json s = svc.create_session(json::object());
  EXPECT_EQ(s["labeled"], 3);
  EXPECT_EQ(s["round"], 0);
  const json m = svc.get_metrics(s["session_id"]);
  ASSERT_EQ(m["points"].size(), 1u);
  EXPECT_EQ(m["points"][0]["labeled_count"], 3);
  EXPECT_EQ(m["label_counts"]["Blackletter"], 1);
  EXPECT_EQ(m["label_counts"]["Roman"], 1);
  EXPECT_EQ(m["label_counts"]["Mixed"], 1);
  EXPECT_TRUE(m["points"][0]["accuracy"].is_null());
}

TEST(Service, BatchContractAndIdempotence) {
  LabelingService svc(pool_of(10), {}, fast_options());
  const std::string id = svc.create_session({{"strategy", "S5"}})["session_id"];
  const json a = svc.get_batch(id);
  ASSERT_EQ(a["pages"].size(), 20u);
  for (std::size_t k = 0; k < a["pages"].size(); ++k) {
    const json& p = a["pages"][k];
    EXPECT_TRUE(p["scores"]["uncertainty"].is_number());
    EXPECT_TRUE(p["scores"]["dissimilarity"].is_number());
    // The diversity term needs an earlier pick in the same batch.
    EXPECT_EQ(p["scores"]["diversity"].is_number(), k > 0);
    EXPECT_EQ(p["thumbnail_url"], "/pages/" + p["page_id"].get<std::string>() + "/thumbnail");
  }
  EXPECT_EQ(svc.get_batch(id)["pages"], a["pages"]);
  EXPECT_EQ(svc.snapshot(id)->pending, 20u);
}

TEST(Service, PartialSubmissionsAccumulateWithoutRetrain) {
  const auto data = pool_of(10);
  const auto truth = truth_of(data);
  LabelingService svc(data, {}, fast_options());
  const std::string id = svc.create_session(json::object())["session_id"];
  const auto ids = batch_ids(svc.get_batch(id));
  const std::vector<std::string> first(ids.begin(), ids.begin() + 10);
  const json r = svc.submit_labels(id, labels_body(first, truth));
  EXPECT_EQ(r["status"], "partial");
  EXPECT_EQ(r["remaining"], 10);
  EXPECT_EQ(r["echo"].size(), 10u);
  EXPECT_EQ(svc.get_metrics(id)["points"].size(), 1u);
  // The batch still lists every page, with the labels received so far.
  const json b = svc.get_batch(id);
  EXPECT_EQ(batch_ids(b), ids);
  EXPECT_EQ(b["pages"][0]["submitted_label"], to_string(truth.at(ids[0])));
  EXPECT_FALSE(b["pages"][15].contains("submitted_label"));
}

TEST(Service, NonPendingPageRejectsWholeRequest) {
  const auto data = pool_of(10);
  const auto truth = truth_of(data);
  LabelingService svc(data, {}, fast_options());
  const std::string id = svc.create_session(json::object())["session_id"];
  const auto ids = batch_ids(svc.get_batch(id));
  json body = labels_body({ids[0]}, truth);
  body["labels"].push_back({{"page_id", "no-such-page"}, {"label", "Roman"}});
  try {
    svc.submit_labels(id, body);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::validation);
    EXPECT_NE(std::string(e.what()).find("no-such-page"), std::string::npos);
  }
  const json b = svc.get_batch(id);
  EXPECT_EQ(batch_ids(b), ids);
  EXPECT_FALSE(b["pages"][0].contains("submitted_label"));  // nothing applied
}

TEST(Service, BadLabelAndBodyValidation) {
  LabelingService svc(pool_of(10), {}, fast_options());
  const std::string id = svc.create_session(json::object())["session_id"];
  const auto ids = batch_ids(svc.get_batch(id));
  EXPECT_EQ(code_of([&] { svc.submit_labels(id, {{"labels", {{{"page_id", ids[0]}, {"label", "Gothic"}}}}}); }),
            Errc::validation);
  EXPECT_EQ(code_of([&] { svc.submit_labels(id, json::array()); }), Errc::validation);
  EXPECT_EQ(code_of([&] { svc.create_session({{"strategy", "S9"}}); }), Errc::validation);
  EXPECT_EQ(code_of([&] { svc.create_session({{"batch_size", 0}}); }), Errc::validation);
  EXPECT_EQ(code_of([&] { svc.create_session({{"seed", -1}}); }), Errc::validation);
  EXPECT_EQ(code_of([&] { svc.create_session({{"seed_labels", {{"ghost", "Roman"}}}}); }), Errc::validation);
  EXPECT_EQ(code_of([&] { svc.get_batch("s999"); }), Errc::not_found);
  EXPECT_EQ(code_of([&] { svc.get_metrics("s999"); }), Errc::not_found);
  EXPECT_EQ(code_of([&] { svc.thumbnail("ghost"); }), Errc::not_found);
}

TEST(Service, DuplicateSubmissionLastWriteWinsWithAudit) {
  const auto data = pool_of(10);
  const auto truth = truth_of(data);
  LabelingService svc(data, {}, fast_options());
  const std::string id = svc.create_session(json::object())["session_id"];
  const auto ids = batch_ids(svc.get_batch(id));
  const Label right = truth.at(ids[0]);
  const Label wrong = right == Label::roman ? Label::mixed : Label::roman;
  svc.submit_labels(id, {{"labels", {{{"page_id", ids[0]}, {"label", to_string(wrong)}, {"annotator", "a1"}}}}});
  svc.submit_labels(id, {{"labels", {{{"page_id", ids[0]}, {"label", to_string(right)}, {"annotator", "a2"}}}}});
  const auto audit = svc.audit_log(id);
  ASSERT_EQ(audit.size(), 1u);
  EXPECT_EQ(audit[0].page_id, ids[0]);
  EXPECT_EQ(audit[0].previous, wrong);
  EXPECT_EQ(audit[0].replacement, right);
  EXPECT_EQ(audit[0].annotator, "a2");
  EXPECT_EQ(svc.get_batch(id)["pages"][0]["submitted_label"], to_string(right));
}

TEST(Service, CompletedRoundsCountAndInvariants) {
  const auto data = pool_of(10);  // pool of 30: seed 3, then 20, then 7
  const auto truth = truth_of(data);
  LabelingService svc(data, {}, fast_options());
  const std::string id = svc.create_session(json::object())["session_id"];

  const auto first = batch_ids(svc.get_batch(id));
  const json r1 = svc.submit_labels(id, labels_body(first, truth));
  EXPECT_EQ(r1["status"], "complete");
  EXPECT_EQ(r1["round"], 1);
  EXPECT_EQ(r1["point"]["labeled_count"], 23);
  EXPECT_EQ(r1["echo"].size(), 20u);

  const auto second = batch_ids(svc.get_batch(id));
  ASSERT_EQ(second.size(), 7u);  // boundary: fewer than a batch remain
  for (const auto& p : second) EXPECT_EQ(std::count(first.begin(), first.end(), p), 0);
  const json r2 = svc.submit_labels(id, labels_body(second, truth));
  EXPECT_TRUE(r2["pool_exhausted"].get<bool>());

  const json m = svc.get_metrics(id);
  ASSERT_EQ(m["points"].size(), 3u);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(m["points"][k]["round"], k);
  EXPECT_EQ(m["labeled"], 30);
  EXPECT_EQ(m["unlabeled"], 0);
  EXPECT_EQ(svc.get_batch(id)["status"], "pool_exhausted");
}

TEST(Service, ResubmissionAfterCompletionIsNoop) {
  const auto data = pool_of(10);
  const auto truth = truth_of(data);
  LabelingService svc(data, {}, fast_options());
  const std::string id = svc.create_session(json::object())["session_id"];
  const auto first = batch_ids(svc.get_batch(id));
  svc.submit_labels(id, labels_body(first, truth));
  const json again = svc.submit_labels(id, labels_body(first, truth));
  EXPECT_EQ(again["duplicates_ignored"], 20);
  EXPECT_EQ(again["status"], "no_pending_batch");
  EXPECT_EQ(svc.get_metrics(id)["labeled"], 23);
  EXPECT_EQ(svc.get_metrics(id)["points"].size(), 2u);
  // A changed label for an already-applied page is not a retry.
  json changed = labels_body({first[0]}, truth);
  changed["labels"][0]["label"] = truth.at(first[0]) == Label::roman ? "Mixed" : "Roman";
  EXPECT_EQ(code_of([&] { svc.submit_labels(id, changed); }), Errc::validation);
}

TEST(Service, HoldoutGivesAccuracyAndShrinksPool) {
  auto opts = fast_options();
  opts.eval_holdout_per_class = 3;
  LabelingService svc(pool_of(10), {}, opts);
  EXPECT_EQ(svc.pool_size(), 21u);
  const std::string id = svc.create_session(json::object())["session_id"];
  const json m = svc.get_metrics(id);
  ASSERT_TRUE(m["points"][0]["accuracy"].is_number());
  EXPECT_GE(m["points"][0]["accuracy"].get<double>(), 0.0);
}

TEST(Service, ExplicitSeedLabels) {
  const auto data = pool_of(10);
  LabelingService svc(data, {}, fast_options());
  const json s = svc.create_session(
      {{"seed_labels", {{data.page_ids[0], "blackletter"}, {data.page_ids[1], "ROMAN"}, {data.page_ids[2], "Mixed"}}}});
  EXPECT_EQ(s["labeled"], 3);
  for (const auto& id : batch_ids(svc.get_batch(s["session_id"]))) {
    EXPECT_NE(id, data.page_ids[0]);
    EXPECT_NE(id, data.page_ids[1]);
  }
}

TEST(Service, ConcurrentReadersSeeOnlyCompletedSnapshots) {
  const auto data = pool_of(20);
  const auto truth = truth_of(data);
  LabelingService svc(data, {}, fast_options());
  const std::string id = svc.create_session(json::object())["session_id"];
  std::atomic<bool> done{false};
  std::atomic<int> reads{0};
  std::atomic<int> torn{0};
  std::vector<std::thread> readers;
  for (int t = 0; t < 3; ++t) {
    readers.emplace_back([&] {
      std::size_t last_points = 0;
      while (!done) {
        const auto snap = svc.snapshot(id);
        const json m = svc.get_metrics(id);
        ++reads;
        // Rounds and points always agree, labels always match the last point,
        // and history never shrinks.
        if (snap->points.size() != static_cast<std::size_t>(snap->round) + 1) ++torn;
        if (snap->labeled != snap->points.back().labeled_count) ++torn;
        if (snap->points.size() < last_points) ++torn;
        if (m["points"].size() != m["round"].get<std::size_t>() + 1) ++torn;
        last_points = snap->points.size();
      }
    });
  }
  for (int round = 0; round < 3; ++round) {
    const auto ids = batch_ids(svc.get_batch(id));
    svc.submit_labels(id, labels_body(ids, truth));
  }
  done = true;
  for (auto& r : readers) r.join();
  EXPECT_GT(reads.load(), 0);
  EXPECT_EQ(torn.load(), 0);
  EXPECT_EQ(svc.get_metrics(id)["points"].size(), 4u);
}

TEST(Service, ReplayRestoresMidRoundState) {
  testing_support::TempDir dir("replay");
  const auto data = pool_of(10);
  const auto truth = truth_of(data);
  auto opts = fast_options();
  opts.event_log = dir / "events.jsonl";
  std::vector<std::string> pending;
  json metrics;
  std::string id;
  {
    LabelingService svc(data, {}, opts);
    id = svc.create_session({{"strategy", "S1"}, {"seed", 9}})["session_id"];
    svc.submit_labels(id, labels_body(batch_ids(svc.get_batch(id)), truth));
    pending = batch_ids(svc.get_batch(id));
    svc.submit_labels(id, labels_body({pending[0], pending[1]}, truth));
    metrics = svc.get_metrics(id);
  }
  // Simulate a crash that tore the final write.
  std::ofstream(opts.event_log, std::ios::app) << "{\"type\":\"lab";
  LabelingService restored(data, {}, opts);
  EXPECT_EQ(restored.get_metrics(id), metrics);
  const json b = restored.get_batch(id);
  EXPECT_EQ(batch_ids(b), pending);
  EXPECT_EQ(b["pages"][1]["submitted_label"], to_string(truth.at(pending[1])));
  // New sessions do not reuse ids.
  EXPECT_NE(restored.create_session(json::object())["session_id"], id);
  // Finishing the round after restart works.
  const std::vector<std::string> rest(pending.begin() + 2, pending.end());
  EXPECT_EQ(restored.submit_labels(id, labels_body(rest, truth))["status"], "complete");
}

TEST(Service, CorruptLogLineIsParseError) {
  testing_support::TempDir dir("replay_bad");
  auto opts = fast_options();
  opts.event_log = dir / "events.jsonl";
  std::ofstream(opts.event_log) << "not json\n{\"type\":\"noop\"}\n";
  EXPECT_EQ(code_of([&] { LabelingService svc(pool_of(10), {}, opts); }), Errc::parse);
}

TEST(Service, ThumbnailsArePngAt256) {
  testing_support::TempDir dir("thumbs");
  const auto data = pool_of(10);
  Rng rng(1);
  const auto page = testing_support::random_gray(rng, 300, 600);
  save_png(page, (dir / "p.png").string());
  std::map<std::string, std::string> images{{data.page_ids[0], "p.png"}};
  auto opts = fast_options();
  opts.image_root = dir.path();
  LabelingService svc(data, images, opts);

  const auto from_image = decode_image(*svc.thumbnail(data.page_ids[0]));
  EXPECT_EQ(from_image.height(), 256);
  EXPECT_EQ(from_image.width(), 128);
  const auto histogram = decode_image(*svc.thumbnail(data.page_ids[1]));
  EXPECT_EQ(histogram.height(), 256);
  EXPECT_EQ(svc.thumbnail(data.page_ids[1]), svc.thumbnail(data.page_ids[1]));  // cached
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

class HttpFixture : public ::testing::Test {
 protected:
  void start(BofDataset data) {
    service_ = std::make_unique<LabelingService>(std::move(data), std::map<std::string, std::string>{},
                                                 fast_options());
    install_routes(server_, *service_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(60, 0);
  }
  void TearDown() override {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }
  json post(const std::string& path, const json& body, int expect) {
    auto res = client_->Post(path, body.dump(), "application/json");
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, expect) << res->body;
    return json::parse(res->body);
  }
  json get(const std::string& path, int expect = 200) {
    auto res = client_->Get(path);
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, expect) << res->body;
    return json::parse(res->body);
  }

  httplib::Server server_;
  std::unique_ptr<LabelingService> service_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace

TEST_F(HttpFixture, EndpointsAndErrorEnvelope) {
  const auto data = pool_of(10);
  const auto truth = truth_of(data);
  start(data);
  const json s = post("/sessions", {{"strategy", "S6"}, {"batch_size", 5}}, 201);
  const std::string id = s["session_id"];
  const json batch = get("/sessions/" + id + "/batch");
  ASSERT_EQ(batch["pages"].size(), 5u);
  const json done = post("/sessions/" + id + "/labels", labels_body(batch_ids(batch), truth), 200);
  EXPECT_EQ(done["status"], "complete");
  EXPECT_EQ(get("/sessions/" + id + "/metrics")["points"].size(), 2u);

  auto thumb = client_->Get(batch["pages"][0]["thumbnail_url"].get<std::string>());
  ASSERT_TRUE(thumb);
  EXPECT_EQ(thumb->status, 200);
  EXPECT_EQ(thumb->get_header_value("Content-Type"), "image/png");
  EXPECT_EQ(thumb->body.substr(1, 3), "PNG");

  const json missing = get("/sessions/nope/batch", 404);
  EXPECT_EQ(missing["error"]["code"], "not_found");
  EXPECT_NE(missing["error"]["message"].get<std::string>().find("nope"), std::string::npos);
  auto bad = client_->Post("/sessions/" + id + "/labels", "{not json", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(json::parse(bad->body)["error"]["code"], "parse_error");
  const json rejected = post("/sessions/" + id + "/labels", {{"labels", {{{"page_id", "ghost"}, {"label", "Roman"}}}}}, 400);
  EXPECT_EQ(rejected["error"]["code"], "validation_error");
  EXPECT_EQ(get("/nowhere", 404)["error"]["code"], "not_found");
}

TEST_F(HttpFixture, RoundTripToPoolExhaustionWithRetriedSubmit) {
  // 63-page pool: seed 3 plus three full batches of 20.
  const auto data = pool_of(21);
  const auto truth = truth_of(data);
  start(data);
  const std::string id = post("/sessions", json::object(), 201)["session_id"];
  for (int round = 0; round < 3; ++round) {
    const auto ids = batch_ids(get("/sessions/" + id + "/batch"));
    ASSERT_EQ(ids.size(), 20u);
    const json body = labels_body(ids, truth);
    const json first = post("/sessions/" + id + "/labels", body, 200);
    EXPECT_EQ(first["status"], "complete");
    // Same request again, as after a dropped response.
    const json retry = post("/sessions/" + id + "/labels", body, 200);
    EXPECT_EQ(retry["duplicates_ignored"], 20);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      EXPECT_EQ(first["echo"][k]["label"], body["labels"][k]["label"]);
    }
  }
  const json m = get("/sessions/" + id + "/metrics");
  EXPECT_EQ(m["points"].size(), 4u);
  EXPECT_EQ(m["labeled"], 63);
  EXPECT_EQ(get("/sessions/" + id + "/batch")["status"], "pool_exhausted");
}
