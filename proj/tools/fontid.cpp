// fontid: command-line front end for the font-identification pipeline.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include <CLI11.hpp>

#include "fontid/cache.hpp"
#include "fontid/config.hpp"
#include "fontid/dataset.hpp"
#include "fontid/harness.hpp"
#include "fontid/ingest.hpp"
#include "fontid/llp.hpp"
#include "fontid/page_features.hpp"
#include "fontid/report.hpp"
#include "fontid/sampler.hpp"
#include "fontid/service.hpp"

namespace fs = std::filesystem;
using namespace fontid;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int jobs = 1;

  // ingest
  std::string manifest;
  std::vector<std::string> hocr_files;
  std::string image_ext = ".png";
  std::string out;

  // features / codebook / bof
  std::string cache_dir;
  std::string features_csv;
  std::string codebook_path;
  std::optional<int> k;

  // train / sample / split / simulate
  std::string bof_path;
  std::string model_path;
  std::optional<double> sigma;
  std::optional<double> lambda;
  std::vector<std::string> strategies;
  std::optional<int> batch_size;
  std::optional<int> reps;
  std::vector<int> test_per_class;
  std::vector<int> synthetic_pages;

  // word-cv
  std::string subset = "ALL";
  int folds = 5;

  // serve
  std::optional<int> port;
  std::string event_log;
  std::optional<int> holdout;

  // report
  std::string curves_csv;
};

const CLI::Validator kStrategyName(
    [](std::string& value) -> std::string {
      if (value == "all" || value == "ALL") return {};
      if (!try_parse_strategy(value)) {
        return "unknown strategy '" + value + "'; expected one of S1, S2, S3, S4, S5, S6, Random, all";
      }
      return {};
    },
    "STRATEGY");

ToolConfig load_tool_config(const Options& o) {
  ToolConfig cfg = o.config_path.empty() ? parse_config("") : load_config(o.config_path);
  if (o.seed) {
    cfg.codebook.seed = *o.seed;
    cfg.harness.seed = *o.seed;
    if (cfg.harness.synthetic) cfg.harness.synthetic->seed = *o.seed;
  }
  if (!o.cache_dir.empty()) cfg.paths.cache_dir = o.cache_dir;
  if (o.k) cfg.codebook.k = *o.k;
  if (o.sigma) cfg.llp.sigma = *o.sigma;
  if (o.lambda) cfg.llp.lambda = *o.lambda;
  if (o.batch_size) cfg.sampler.batch_size = *o.batch_size;
  if (o.reps) cfg.harness.repetitions = *o.reps;
  if (!o.strategies.empty()) {
    cfg.harness.strategies.clear();
    for (const auto& s : o.strategies) {
      if (s == "all" || s == "ALL") {
        cfg.harness.strategies.assign(kAllStrategies.begin(), kAllStrategies.end());
      } else {
        cfg.harness.strategies.push_back(parse_strategy(s));
      }
    }
    cfg.sampler.strategy = cfg.harness.strategies.front();
  }
  if (!o.test_per_class.empty()) {
    if (o.test_per_class.size() != kNumClasses) {
      throw Error(Errc::configuration, "--test-per-class takes three integers (blackletter roman mixed)");
    }
    std::copy(o.test_per_class.begin(), o.test_per_class.end(), cfg.harness.test_per_class.begin());
  }
  if (!o.synthetic_pages.empty()) {
    if (o.synthetic_pages.size() != kNumClasses) {
      throw Error(Errc::configuration, "--synthetic takes three integers (blackletter roman mixed)");
    }
    SyntheticSpec spec = cfg.harness.synthetic.value_or(SyntheticSpec{});
    std::copy(o.synthetic_pages.begin(), o.synthetic_pages.end(), spec.pages_per_class.begin());
    if (o.seed) spec.seed = *o.seed;
    cfg.harness.synthetic = spec;
  }
  if (o.port) cfg.service.port = *o.port;
  if (o.holdout) cfg.service.eval_holdout_per_class = *o.holdout;
  if (!o.event_log.empty()) cfg.service.event_log = o.event_log;
  if (auto errors = validate_config(cfg); !errors.empty()) throw Error(Errc::validation, detail::join_errors(errors));
  return cfg;
}

std::string require_path(const std::string& flag_value, const std::string& config_value, const char* flag) {
  const std::string path = flag_value.empty() ? config_value : flag_value;
  if (path.empty()) throw Error(Errc::configuration, std::string("missing ") + flag + " (flag or config)");
  return path;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << text;
}

BofDataset dataset_for(const Options& o, const ToolConfig& cfg) {
  const std::string path = o.bof_path.empty() ? cfg.paths.bof_table : o.bof_path;
  if (!path.empty()) return load_bof_table(path);
  if (cfg.harness.synthetic) return make_synthetic_dataset(*cfg.harness.synthetic);
  throw Error(Errc::configuration, "no dataset: pass --bof <table> or --synthetic B R M");
}

// ---------------------------------------------------------------------------

int cmd_ingest(const Options& o) {
  std::vector<PageRecord> pages;
  if (!o.manifest.empty()) pages = load_dataset(o.manifest);
  for (const auto& hocr_path : o.hocr_files) {
    std::ifstream in(hocr_path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot open hOCR file: " + hocr_path);
    std::stringstream ss;
    ss << in.rdbuf();
    const fs::path p(hocr_path);
    fs::path image = p;
    image.replace_extension(o.image_ext);
    pages.push_back(page_from_hocr(ss.str(), p.stem().string(), image.string()));
  }
  const std::string text = manifest_to_json(pages).dump(2) + "\n";
  parse_manifest(text);  // re-validate (duplicate ids across inputs)
  if (o.out.empty()) std::cout << text;
  else write_text(o.out, text);
  std::size_t words = 0;
  for (const auto& p : pages) words += p.words.size();
  std::cerr << "ingest: " << pages.size() << " pages, " << words << " word boxes\n";
  return 0;
}

int cmd_features(const Options& o) {
  const ToolConfig cfg = load_tool_config(o);
  const std::string manifest = require_path(o.manifest, cfg.paths.manifest, "--manifest");
  const auto pages = load_dataset(manifest);
  const FeaturePipeline pipeline{cfg.imgproc, cfg.box_filter, cfg.features};
  const auto summary = cache_features(pages, pipeline, cfg.paths.cache_dir, fs::path(manifest).parent_path(), o.jobs);
  for (const auto& d : summary.diagnostics) std::cerr << "warning: " << d << "\n";
  const std::string out = o.out.empty() ? (fs::path(cfg.paths.output_dir) / "word_features.csv").string() : o.out;
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  save_word_features(summary.all_rows(), out);
  std::cerr << "features: " << pages.size() << " pages, " << summary.hits << " cache hits, " << summary.misses
            << " computed, " << summary.failures << " failed (warnings: " << summary.diagnostics.size() << ")\n";
  return 0;
}

int cmd_codebook(const Options& o) {
  const ToolConfig cfg = load_tool_config(o);
  const auto rows = load_word_features(require_path(o.features_csv, cfg.paths.word_features, "--features"));
  std::vector<WordFeatureVector> feats;
  for (const auto& r : rows) feats.push_back(r.features);
  const Codebook cb = build_codebook(feats, cfg.codebook.k, cfg.codebook.seed, cfg.codebook.kmeans);
  const std::string out = o.out.empty() ? require_path("", cfg.paths.codebook, "--out") : o.out;
  save_codebook(cb, out);
  std::cerr << "codebook: k=" << cb.k << " from " << feats.size() << " words, " << cb.iterations
            << " iterations, inertia " << cb.inertia_history.back() << "\n";
  return 0;
}

int cmd_bof(const Options& o) {
  const ToolConfig cfg = load_tool_config(o);
  const auto rows = load_word_features(require_path(o.features_csv, cfg.paths.word_features, "--features"));
  const Codebook cb = load_codebook(require_path(o.codebook_path, cfg.paths.codebook, "--codebook"));
  std::map<std::string, std::optional<Label>> labels;
  std::vector<std::string> order;
  if (const std::string m = o.manifest.empty() ? cfg.paths.manifest : o.manifest; !m.empty()) {
    for (const auto& p : load_dataset(m)) {
      labels[p.page_id] = p.label;
      order.push_back(p.page_id);
    }
  }
  std::map<std::string, std::vector<WordFeatureVector>> by_page;
  for (const auto& r : rows) {
    if (!labels.count(r.page_id) && std::find(order.begin(), order.end(), r.page_id) == order.end()) {
      order.push_back(r.page_id);
      labels[r.page_id] = std::nullopt;
    }
    by_page[r.page_id].push_back(r.features);
  }
  BofDataset data;
  std::size_t skipped = 0;
  for (const auto& id : order) {
    auto it = by_page.find(id);
    if (it == by_page.end()) {
      std::cerr << "warning: page " << id << " has no word features; skipped\n";
      ++skipped;
      continue;
    }
    data.page_ids.push_back(id);
    data.bofs.push_back(page_bof(it->second, cb));
    data.labels.push_back(labels[id]);
  }
  const std::string out = o.out.empty() ? require_path("", cfg.paths.bof_table, "--out") : o.out;
  save_bof_table(data, out);
  std::cerr << "bof: " << data.size() << " pages written, " << skipped << " skipped\n";
  return 0;
}

int cmd_train(const Options& o) {
  const ToolConfig cfg = load_tool_config(o);
  const BofDataset data = dataset_for(o, cfg);
  PartialLabels partial(data.labels.begin(), data.labels.end());
  const auto s = similarity_matrix(data.bofs, cfg.llp.sigma);
  const LlpModel model = train_llp(stack_features(data.bofs), partial, s, cfg.llp);
  const std::string out = o.out.empty() ? require_path("", cfg.paths.model, "--out") : o.out;
  save_model(model, out);
  std::cerr << "train: " << model.labeled_count << " labeled, " << model.unlabeled_count << " unlabeled, "
            << model.iterations << " iterations, loss " << model.final_loss << ", |grad| " << model.gradient_norm
            << "\n";
  return 0;
}

int cmd_sample(const Options& o) {
  const ToolConfig cfg = load_tool_config(o);
  const BofDataset data = dataset_for(o, cfg);
  const LlpModel model = load_model(require_path(o.model_path, cfg.paths.model, "--model"));
  std::vector<std::size_t> labeled, unlabeled;
  for (std::size_t i = 0; i < data.size(); ++i) (data.labels[i] ? labeled : unlabeled).push_back(i);
  const auto s = similarity_matrix(data.bofs, model.sigma);
  Rng rng(mix_seed(cfg.harness.seed, 1));
  const QueryBatch batch =
      select_batch(cfg.sampler.strategy, model, data.bofs, unlabeled, labeled, s, cfg.sampler.batch_size, rng);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : batch.picks) {
    nlohmann::json e = {{"page_id", data.page_ids[p.index]}, {"uncertainty", p.scores.uncertainty},
                        {"total", p.scores.total}};
    e["dissimilarity"] = p.scores.dissimilarity ? nlohmann::json(*p.scores.dissimilarity) : nlohmann::json(nullptr);
    e["diversity"] = p.scores.diversity ? nlohmann::json(*p.scores.diversity) : nlohmann::json(nullptr);
    out.push_back(e);
  }
  const std::string text = nlohmann::json{{"strategy", to_string(cfg.sampler.strategy)}, {"batch", out}}.dump(2) + "\n";
  if (o.out.empty()) std::cout << text;
  else write_text(o.out, text);
  return 0;
}

int cmd_split(const Options& o) {
  const ToolConfig cfg = load_tool_config(o);
  const BofDataset data = dataset_for(o, cfg);
  Rng rng(cfg.harness.seed);
  const Split split = split_dataset(data.labels, cfg.harness.test_per_class, rng);
  for (const auto& w : split.warnings) std::cerr << "warning: " << w << "\n";
  auto subset = [&](const std::vector<std::size_t>& idx) {
    BofDataset d;
    for (auto i : idx) {
      d.page_ids.push_back(data.page_ids[i]);
      d.bofs.push_back(data.bofs[i]);
      d.labels.push_back(data.labels[i]);
    }
    return d;
  };
  const fs::path dir = o.out.empty() ? fs::path(cfg.paths.output_dir) : fs::path(o.out);
  fs::create_directories(dir);
  save_bof_table(subset(split.train), (dir / "train.csv").string());
  save_bof_table(subset(split.test), (dir / "test.csv").string());
  std::cerr << "split: " << split.train.size() << " train, " << split.test.size() << " test\n";
  return 0;
}

int cmd_simulate(const Options& o) {
  const ToolConfig cfg = load_tool_config(o);
  const BofDataset data = dataset_for(o, cfg);
  const ExperimentConfig exp = cfg.experiment();

  const std::vector<RepeatedResult> results = run_experiments(data, exp, o.jobs);
  for (const auto& r : results) {
    for (const auto& c : r.curves) {
      if (c.aborted) std::cerr << "warning: " << to_string(r.strategy) << " run aborted: " << *c.aborted << "\n";
    }
  }
  const fs::path dir = o.out.empty() ? fs::path(cfg.paths.output_dir) : fs::path(o.out);
  emit_report(results, dir);
  write_text(dir / "config.toml", config_to_toml(cfg));
  for (const auto* r : in_legend_order(results)) {
    std::cerr << to_string(r->strategy) << ": mean AUC " << r->mean_auc << " (sd " << r->std_auc << ", "
              << r->curves.size() << " reps)\n";
  }
  return 0;
}

int cmd_word_cv(const Options& o) {
  const ToolConfig cfg = load_tool_config(o);
  const auto rows = load_word_features(require_path(o.features_csv, cfg.paths.word_features, "--features"));
  std::map<std::string, std::optional<Label>> page_labels;
  for (const auto& p : load_dataset(require_path(o.manifest, cfg.paths.manifest, "--manifest"))) {
    page_labels[p.page_id] = p.label;
  }
  std::vector<WordFeatureVector> feats;
  std::vector<Label> labels;
  for (const auto& r : rows) {
    auto it = page_labels.find(r.page_id);
    if (it == page_labels.end() || !it->second || *it->second == Label::mixed) continue;
    feats.push_back(r.features);
    labels.push_back(*it->second);
  }
  const FeatureSubset subset = parse_feature_subset(o.subset);
  const double acc = word_level_cv(feats, labels, subset, cfg.harness.seed, o.folds);
  std::cout << "subset,columns,words,accuracy\n"
            << o.subset << "," << feature_columns(subset).size() << "," << feats.size() << "," << format_double(acc)
            << "\n";
  return 0;
}

int cmd_pca(const Options& o) {
  const ToolConfig cfg = load_tool_config(o);
  const BofDataset data = dataset_for(o, cfg);
  const PcaResult pca = pca_projection(data.bofs);
  std::ostringstream os;
  os << "page_id,label,pc1,pc2\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    os << csv_escape(data.page_ids[i]) << "," << (data.labels[i] ? std::string(to_string(*data.labels[i])) : "") << ","
       << format_double(pca.coords(static_cast<Eigen::Index>(i), 0)) << ","
       << format_double(pca.coords(static_cast<Eigen::Index>(i), 1)) << "\n";
  }
  if (o.out.empty()) std::cout << os.str();
  else write_text(o.out, os.str());
  const double total = pca.eigenvalues.sum();
  std::cerr << "pca: explained variance " << (total > 0 ? pca.eigenvalues(0) / total : 0.0) << ", "
            << (total > 0 ? pca.eigenvalues(1) / total : 0.0) << "\n";
  return 0;
}

int cmd_report(const Options& o) {
  std::ifstream in(o.curves_csv, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + o.curves_csv);
  const auto results = read_curves_csv(in, o.curves_csv);
  const fs::path dir = o.out.empty() ? fs::path(o.curves_csv).parent_path() : fs::path(o.out);
  const auto files = emit_report(results, dir);
  std::cerr << "report: " << files.html.string() << "\n";
  return 0;
}

int cmd_serve(const Options& o) {
  const ToolConfig cfg = load_tool_config(o);
  BofDataset data = dataset_for(o, cfg);
  std::map<std::string, std::string> images;
  fs::path image_root;
  if (const std::string m = o.manifest.empty() ? cfg.paths.manifest : o.manifest; !m.empty()) {
    for (const auto& p : load_dataset(m)) images[p.page_id] = p.image_path;
    image_root = fs::path(m).parent_path();
  }
  ServiceOptions opts;
  opts.llp = cfg.llp;
  opts.batch_size = cfg.sampler.batch_size;
  opts.strategy = cfg.sampler.strategy;
  opts.seed = cfg.harness.seed;
  opts.eval_holdout_per_class = cfg.service.eval_holdout_per_class;
  opts.event_log = cfg.service.event_log;
  opts.image_root = image_root;
  LabelingService service(std::move(data), std::move(images), opts);
  httplib::Server server;
  server.new_task_queue = [n = cfg.service.workers] { return new httplib::ThreadPool(static_cast<std::size_t>(n)); };
  install_routes(server, service);
  std::cerr << "serve: " << service.pool_size() << " pool pages on http://" << cfg.service.host << ":"
            << cfg.service.port << "\n";
  if (!server.listen(cfg.service.host, cfg.service.port)) {
    throw Error(Errc::io, "cannot listen on " + cfg.service.host + ":" + std::to_string(cfg.service.port));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Font identification for historical page scans"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "TOML configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "seed for every random choice");
  };
  auto add_dataset = [&](CLI::App* sub) {
    sub->add_option("--bof", o.bof_path, "BoF table (page_id,label,b0..)");
    sub->add_option("--synthetic", o.synthetic_pages, "synthetic Dirichlet dataset: pages per class B R M")
        ->expected(3);
  };

  auto* ingest = app.add_subcommand("ingest", "validate a manifest and/or convert hOCR files into one");
  ingest->add_option("--manifest", o.manifest, "input manifest JSON");
  ingest->add_option("--hocr", o.hocr_files, "hOCR files; images share the file stem");
  ingest->add_option("--image-ext", o.image_ext, "image extension paired with hOCR files");
  ingest->add_option("--out", o.out, "output manifest (stdout if omitted)");

  auto* features = app.add_subcommand("features", "extract word features for every page (cached)");
  add_common(features);
  features->add_option("--manifest", o.manifest, "dataset manifest");
  features->add_option("--cache-dir", o.cache_dir, "feature cache directory (env FONTID_CACHE_DIR)");
  features->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  features->add_option("--out", o.out, "word-feature CSV");

  auto* codebook = app.add_subcommand("codebook", "build the k-means word-feature codebook");
  add_common(codebook);
  codebook->add_option("--features", o.features_csv, "word-feature CSV");
  codebook->add_option("-k", o.k, "codebook size");
  codebook->add_option("--out", o.out, "codebook JSON");

  auto* bof = app.add_subcommand("bof", "quantize word features into page BoF vectors");
  add_common(bof);
  bof->add_option("--features", o.features_csv, "word-feature CSV");
  bof->add_option("--codebook", o.codebook_path, "codebook JSON");
  bof->add_option("--manifest", o.manifest, "manifest supplying page labels and order");
  bof->add_option("--out", o.out, "BoF table CSV");

  auto* train = app.add_subcommand("train", "train the LLP classifier on a BoF table");
  add_common(train);
  add_dataset(train);
  train->add_option("--sigma", o.sigma, "similarity bandwidth");
  train->add_option("--lambda", o.lambda, "smoothness weight");
  train->add_option("--out", o.out, "model JSON");

  auto* sample = app.add_subcommand("sample", "select the next query batch");
  add_common(sample);
  add_dataset(sample);
  sample->add_option("--model", o.model_path, "model JSON");
  sample->add_option("--strategy", o.strategies, "query strategy")->check(kStrategyName)->expected(1);
  sample->add_option("--batch-size", o.batch_size, "batch size");
  sample->add_option("--out", o.out, "batch JSON (stdout if omitted)");

  auto* split = app.add_subcommand("split", "stratified train/test split of a BoF table");
  add_common(split);
  add_dataset(split);
  split->add_option("--test-per-class", o.test_per_class, "test pages per class B R M")->expected(3);
  split->add_option("--out", o.out, "output directory");

  auto* simulate = app.add_subcommand("simulate", "active-learning simulation with the dataset as oracle");
  add_common(simulate);
  add_dataset(simulate);
  simulate->add_option("--strategy", o.strategies, "query strategies (repeatable, or 'all')")->check(kStrategyName);
  simulate->add_option("--reps", o.reps, "repetitions")->check(CLI::PositiveNumber);
  simulate->add_option("--batch-size", o.batch_size, "batch size");
  simulate->add_option("--sigma", o.sigma, "similarity bandwidth");
  simulate->add_option("--lambda", o.lambda, "smoothness weight");
  simulate->add_option("--test-per-class", o.test_per_class, "test pages per class B R M")->expected(3);
  simulate->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  simulate->add_option("--out", o.out, "output directory");

  auto* word_cv = app.add_subcommand("word-cv", "5-fold word-level Blackletter/Roman classification");
  add_common(word_cv);
  word_cv->add_option("--features", o.features_csv, "word-feature CSV");
  word_cv->add_option("--manifest", o.manifest, "manifest supplying page labels");
  word_cv->add_option("--subset", o.subset, "feature subset")->check(CLI::IsMember({"ALL", "ZM", "SLD-CW"}));
  word_cv->add_option("--folds", o.folds, "folds")->check(CLI::Range(2, 100));

  auto* pca = app.add_subcommand("pca", "2-D principal-component projection of page BoFs");
  add_common(pca);
  add_dataset(pca);
  pca->add_option("--out", o.out, "CSV (stdout if omitted)");

  auto* serve = app.add_subcommand("serve", "HTTP labeling service");
  add_common(serve);
  add_dataset(serve);
  serve->add_option("--manifest", o.manifest, "manifest mapping page ids to images");
  serve->add_option("--port", o.port, "TCP port");
  serve->add_option("--event-log", o.event_log, "append-only session event log");
  serve->add_option("--holdout", o.holdout, "labeled pages per class held out for accuracy");
  serve->add_option("--strategy", o.strategies, "default query strategy")->check(kStrategyName)->expected(1);
  serve->add_option("--batch-size", o.batch_size, "batch size");

  auto* report = app.add_subcommand("report", "re-render CSV/HTML report from learning_curves.csv");
  report->add_option("--curves", o.curves_csv, "learning_curves.csv")->required();
  report->add_option("--out", o.out, "output directory (defaults to the CSV's directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "ingest") return cmd_ingest(o);
    if (name == "features") return cmd_features(o);
    if (name == "codebook") return cmd_codebook(o);
    if (name == "bof") return cmd_bof(o);
    if (name == "train") return cmd_train(o);
    if (name == "sample") return cmd_sample(o);
    if (name == "split") return cmd_split(o);
    if (name == "simulate") return cmd_simulate(o);
    if (name == "word-cv") return cmd_word_cv(o);
    if (name == "pca") return cmd_pca(o);
    if (name == "serve") return cmd_serve(o);
    if (name == "report") return cmd_report(o);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
