#pragma once

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <toml.hpp>

#include "fontid/dataset.hpp"
#include "fontid/error.hpp"
#include "fontid/harness.hpp"
#include "fontid/imgproc.hpp"
#include "fontid/ingest.hpp"
#include "fontid/page_features.hpp"
#include "fontid/sampler.hpp"
#include "fontid/word_features.hpp"

namespace fontid {

inline constexpr const char* kCacheDirEnv = "FONTID_CACHE_DIR";

struct ToolConfig {
  struct Paths {
    std::string manifest;
    std::string cache_dir = ".fontid-cache";
    std::string output_dir = "out";
    std::string codebook;
    std::string model;
    std::string bof_table;
    std::string word_features;
  } paths;
  PreprocessParams imgproc;
  BoxFilter box_filter;
  WordFeatureParams features;
  struct CodebookSection {
    int k = kDefaultCodebookSize;
    std::uint64_t seed = 0;
    KMeansParams kmeans;
  } codebook;
  LlpOptions llp;
  struct SamplerSection {
    int batch_size = kDefaultBatchSize;
    Strategy strategy = Strategy::s5;
  } sampler;
  struct HarnessSection {
    std::vector<Strategy> strategies{Strategy::s5};
    int repetitions = 20;
    std::uint64_t seed = 0;
    std::array<int, kNumClasses> test_per_class{200, 200, 200};
    int seed_per_class = 1;
    std::optional<SyntheticSpec> synthetic;  // used when paths.bof_table is empty
  } harness;
  struct ServiceSection {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string event_log = "events.jsonl";
    int eval_holdout_per_class = 0;  // pages per class held out for live accuracy; 0 disables
    int workers = 4;
  } service;

  ExperimentConfig experiment() const {
    ExperimentConfig e;
    e.strategies = harness.strategies;
    e.batch_size = sampler.batch_size;
    e.repetitions = harness.repetitions;
    e.seed = harness.seed;
    e.test_per_class = harness.test_per_class;
    e.seed_per_class = harness.seed_per_class;
    e.llp = llp;
    return e;
  }
};

namespace detail {

class TomlReader {
 public:
  explicit TomlReader(const toml::table& root) : root_(root) {}

  const toml::table* section(const std::string& name) {
    known_sections_.insert(name);
    const auto* node = root_.at_path(name).node();
    if (!node) return nullptr;
    if (!node->is_table()) {
      errors_.push_back(name + ": expected a table");
      return nullptr;
    }
    return node->as_table();
  }

  template <class T>
  void read(const std::string& sec, const std::string& key, T& out) {
    known_keys_.insert(sec + "." + key);
    const toml::table* table = lookup(sec);
    if (!table) return;
    const toml::node* node = table->get(key);
    if (!node) return;
    const std::string where = sec + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (auto v = node->value<bool>()) out = *v;
      else errors_.push_back(where + ": expected a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (auto v = node->value<std::string>()) out = *v;
      else errors_.push_back(where + ": expected a string");
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      auto v = node->value<std::int64_t>();
      if (v && *v >= 0) out = static_cast<std::uint64_t>(*v);
      else errors_.push_back(where + ": expected a non-negative integer");
    } else if constexpr (std::is_integral_v<T>) {
      if (node->is_integer()) out = static_cast<T>(*node->value<std::int64_t>());
      else errors_.push_back(where + ": expected an integer");
    } else {
      if (auto v = node->value<double>()) out = *v;
      else errors_.push_back(where + ": expected a number");
    }
  }

  void read_strategy(const std::string& sec, const std::string& key, Strategy& out) {
    std::string text;
    read(sec, key, text);
    if (text.empty()) return;
    if (auto s = try_parse_strategy(text)) out = *s;
    else errors_.push_back(sec + "." + key + ": unknown strategy '" + text + "' (expected S1..S6 or Random)");
  }

  void read_preconditioner(const std::string& sec, const std::string& key, Preconditioner& out) {
    std::string text;
    read(sec, key, text);
    if (text.empty()) return;
    if (auto p = try_parse_preconditioner(text)) out = *p;
    else errors_.push_back(sec + "." + key + ": unknown preconditioner '" + text + "' (expected none, isotropic or whiten)");
  }

  void read_strategies(const std::string& sec, const std::string& key, std::vector<Strategy>& out) {
    known_keys_.insert(sec + "." + key);
    const toml::table* table = lookup(sec);
    if (!table || !table->get(key)) return;
    const auto* arr = table->get(key)->as_array();
    if (!arr) {
      errors_.push_back(sec + "." + key + ": expected an array of strategy names");
      return;
    }
    std::vector<Strategy> parsed;
    for (const auto& el : *arr) {
      auto text = el.value<std::string>();
      auto s = text ? try_parse_strategy(*text) : std::nullopt;
      if (!s) {
        errors_.push_back(sec + "." + key + ": entries must be one of S1, S2, S3, S4, S5, S6, Random");
        return;
      }
      parsed.push_back(*s);
    }
    out = parsed;
  }

  void read_class_triple(const std::string& sec, const std::string& key, std::array<int, kNumClasses>& out) {
    known_keys_.insert(sec + "." + key);
    const toml::table* table = lookup(sec);
    if (!table || !table->get(key)) return;
    const auto* arr = table->get(key)->as_array();
    if (!arr || arr->size() != kNumClasses) {
      errors_.push_back(sec + "." + key + ": expected [blackletter, roman, mixed] integers");
      return;
    }
    for (std::size_t i = 0; i < kNumClasses; ++i) {
      auto v = (*arr)[i].value<std::int64_t>();
      if (!v || !(*arr)[i].is_integer()) {
        errors_.push_back(sec + "." + key + ": expected [blackletter, roman, mixed] integers");
        return;
      }
      out[i] = static_cast<int>(*v);
    }
  }

  std::vector<std::string> finish() {
    for (const auto& [name, node] : root_) {
      const std::string sec(name.str());
      if (!known_sections_.count(sec)) {
        errors_.push_back("unknown section [" + sec + "]");
        continue;
      }
      if (const auto* t = node.as_table()) check_keys(sec, *t);
    }
    return errors_;
  }

 private:
  void check_keys(const std::string& sec, const toml::table& t) {
    for (const auto& [key, node] : t) {
      const std::string path = sec + "." + std::string(key.str());
      if (known_sections_.count(path) && node.is_table()) {
        check_keys(path, *node.as_table());
      } else if (!known_keys_.count(path)) {
        errors_.push_back("unknown key " + path);
      }
    }
  }

  const toml::table* lookup(const std::string& sec) const {
    const auto* node = root_.at_path(sec).node();
    return node ? node->as_table() : nullptr;
  }

  const toml::table& root_;
  std::set<std::string> known_sections_;
  std::set<std::string> known_keys_;
  std::vector<std::string> errors_;
};

inline std::string join_errors(const std::vector<std::string>& errors) {
  std::string out = std::to_string(errors.size()) + " configuration error(s):";
  for (const auto& e : errors) out += "\n  - " + e;
  return out;
}

}  // namespace detail

// Range checks; every violation is reported, not just the first.
inline std::vector<std::string> validate_config(const ToolConfig& c) {
  std::vector<std::string> errors;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  };
  need(c.imgproc.target_height >= 41, "imgproc.target_height must be >= 41 (stroke band needs 41 rows), got " +
                                          std::to_string(c.imgproc.target_height));
  need(c.imgproc.median_window >= 1 && c.imgproc.median_window % 2 == 1,
       "imgproc.median_window must be an odd integer >= 1, got " + std::to_string(c.imgproc.median_window));
  need(c.imgproc.deskew_max_angle >= 0.0 && c.imgproc.deskew_max_angle <= 45.0,
       "imgproc.deskew_max_angle must be in [0, 45], got " + format_double(c.imgproc.deskew_max_angle));
  need(c.imgproc.deskew_step > 0.0, "imgproc.deskew_step must be > 0, got " + format_double(c.imgproc.deskew_step));
  const auto& canny = c.features.slant.canny;
  need(canny.low > 0.0 && canny.low < canny.high && canny.high <= 1.0,
       "features.canny_low/canny_high must satisfy 0 < low < high <= 1");
  need(canny.sigma > 0.0, "features.canny_sigma must be > 0");
  need(c.features.slant.vote_fraction > 0.0 && c.features.slant.vote_fraction <= 1.0,
       "features.vote_fraction must be in (0, 1], got " + format_double(c.features.slant.vote_fraction));
  need(c.features.slant.min_votes >= 1, "features.min_votes must be >= 1");
  need(c.features.slant.slope_tolerance >= 0.0 && c.features.slant.slope_tolerance < 45.0,
       "features.slope_tolerance must be in [0, 45)");
  need(c.features.stroke.half_band >= 0, "features.stroke_half_band must be >= 0");
  need(c.features.stroke.trim_fraction >= 0.0 && c.features.stroke.trim_fraction < 0.5,
       "features.trim_fraction must be in [0, 0.5), got " + format_double(c.features.stroke.trim_fraction));
  need(c.box_filter.min_char_count >= 1, "features.min_char_count must be >= 1");
  need(c.codebook.k >= 2, "codebook.k must be >= 2, got " + std::to_string(c.codebook.k));
  need(c.codebook.kmeans.max_iterations >= 1, "codebook.max_iterations must be >= 1");
  need(c.codebook.kmeans.tolerance > 0.0, "codebook.tolerance must be > 0");
  need(c.llp.sigma > 0.0, "llp.sigma must be > 0, got " + format_double(c.llp.sigma));
  need(c.llp.lambda >= 0.0, "llp.lambda must be >= 0, got " + format_double(c.llp.lambda));
  need(c.llp.max_iterations >= 1, "llp.max_iterations must be >= 1");
  need(c.llp.gradient_tolerance > 0.0, "llp.gradient_tolerance must be > 0");
  need(c.sampler.batch_size >= 1, "sampler.batch_size must be >= 1, got " + std::to_string(c.sampler.batch_size));
  need(c.harness.repetitions >= 1, "harness.repetitions must be >= 1, got " + std::to_string(c.harness.repetitions));
  need(!c.harness.strategies.empty(), "harness.strategies must not be empty");
  for (int t : c.harness.test_per_class) need(t >= 0, "harness.test_per_class entries must be >= 0");
  need(c.harness.seed_per_class >= 1, "harness.seed_per_class must be >= 1");
  if (c.harness.synthetic) {
    const auto& s = *c.harness.synthetic;
    need(s.bins >= 2, "harness.synthetic.bins must be >= 2");
    need(s.concentration > 0.0, "harness.synthetic.concentration must be > 0");
    need(s.contrast >= 0.0 && s.contrast < 1.0, "harness.synthetic.contrast must be in [0, 1)");
    for (int p : s.pages_per_class) need(p >= 0, "harness.synthetic.pages_per_class entries must be >= 0");
  }
  need(c.service.port >= 0 && c.service.port <= 65535, "service.port must be in [0, 65535]");
  need(c.service.workers >= 1, "service.workers must be >= 1");
  need(c.service.eval_holdout_per_class >= 0, "service.eval_holdout_per_class must be >= 0");
  return errors;
}

// Parses and validates; throws Errc::validation listing every problem.
inline ToolConfig parse_config(const std::string& text, const std::string& source = "config") {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
    throw Error(Errc::parse, os.str());
  }
  ToolConfig c;
  detail::TomlReader r(root);
  r.section("paths");
  r.read("paths", "manifest", c.paths.manifest);
  r.read("paths", "cache_dir", c.paths.cache_dir);
  r.read("paths", "output_dir", c.paths.output_dir);
  r.read("paths", "codebook", c.paths.codebook);
  r.read("paths", "model", c.paths.model);
  r.read("paths", "bof_table", c.paths.bof_table);
  r.read("paths", "word_features", c.paths.word_features);

  r.section("imgproc");
  r.read("imgproc", "target_height", c.imgproc.target_height);
  r.read("imgproc", "median_window", c.imgproc.median_window);
  r.read("imgproc", "deskew_max_angle", c.imgproc.deskew_max_angle);
  r.read("imgproc", "deskew_step", c.imgproc.deskew_step);

  r.section("features");
  r.read("features", "canny_low", c.features.slant.canny.low);
  r.read("features", "canny_high", c.features.slant.canny.high);
  r.read("features", "canny_sigma", c.features.slant.canny.sigma);
  r.read("features", "vote_fraction", c.features.slant.vote_fraction);
  r.read("features", "min_votes", c.features.slant.min_votes);
  r.read("features", "slope_tolerance", c.features.slant.slope_tolerance);
  r.read("features", "stroke_half_band", c.features.stroke.half_band);
  r.read("features", "trim_fraction", c.features.stroke.trim_fraction);
  r.read("features", "min_char_count", c.box_filter.min_char_count);
  r.read("features", "min_aspect", c.box_filter.min_aspect);
  r.read("features", "max_aspect", c.box_filter.max_aspect);
  r.read("features", "min_height_fraction", c.box_filter.min_height_fraction);
  r.read("features", "max_height_fraction", c.box_filter.max_height_fraction);
  r.read("features", "max_area_fraction", c.box_filter.max_area_fraction);

  r.section("codebook");
  r.read("codebook", "k", c.codebook.k);
  r.read("codebook", "seed", c.codebook.seed);
  r.read("codebook", "max_iterations", c.codebook.kmeans.max_iterations);
  r.read("codebook", "tolerance", c.codebook.kmeans.tolerance);

  r.section("llp");
  r.read("llp", "sigma", c.llp.sigma);
  r.read("llp", "lambda", c.llp.lambda);
  r.read("llp", "normalize_pairs", c.llp.normalize_pairs);
  r.read("llp", "max_iterations", c.llp.max_iterations);
  r.read("llp", "gradient_tolerance", c.llp.gradient_tolerance);
  r.read_preconditioner("llp", "preconditioner", c.llp.preconditioner);

  r.section("sampler");
  r.read("sampler", "batch_size", c.sampler.batch_size);
  r.read_strategy("sampler", "strategy", c.sampler.strategy);

  r.section("harness");
  r.read_strategies("harness", "strategies", c.harness.strategies);
  r.read("harness", "repetitions", c.harness.repetitions);
  r.read("harness", "seed", c.harness.seed);
  r.read_class_triple("harness", "test_per_class", c.harness.test_per_class);
  r.read("harness", "seed_per_class", c.harness.seed_per_class);
  if (r.section("harness.synthetic")) {
    SyntheticSpec spec;
    r.read_class_triple("harness.synthetic", "pages_per_class", spec.pages_per_class);
    r.read("harness.synthetic", "bins", spec.bins);
    r.read("harness.synthetic", "concentration", spec.concentration);
    r.read("harness.synthetic", "contrast", spec.contrast);
    r.read("harness.synthetic", "seed", spec.seed);
    c.harness.synthetic = spec;
  }

  r.section("service");
  r.read("service", "host", c.service.host);
  r.read("service", "port", c.service.port);
  r.read("service", "event_log", c.service.event_log);
  r.read("service", "eval_holdout_per_class", c.service.eval_holdout_per_class);
  r.read("service", "workers", c.service.workers);

  std::vector<std::string> errors = r.finish();
  for (auto& e : validate_config(c)) errors.push_back(std::move(e));
  if (!errors.empty()) throw Error(Errc::validation, detail::join_errors(errors));

  if (const char* env = std::getenv(kCacheDirEnv); env && *env) c.paths.cache_dir = env;
  return c;
}

inline ToolConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

// Full effective configuration, defaults filled in, for echoing next to outputs.
inline std::string config_to_toml(const ToolConfig& c) {
  auto strategies = toml::array{};
  for (Strategy s : c.harness.strategies) strategies.push_back(std::string(to_string(s)));
  auto triple = [](const std::array<int, kNumClasses>& a) { return toml::array{a[0], a[1], a[2]}; };
  toml::table harness{{"strategies", strategies},
                      {"repetitions", c.harness.repetitions},
                      {"seed", static_cast<std::int64_t>(c.harness.seed)},
                      {"test_per_class", triple(c.harness.test_per_class)},
                      {"seed_per_class", c.harness.seed_per_class}};
  if (c.harness.synthetic) {
    const auto& s = *c.harness.synthetic;
    harness.insert("synthetic", toml::table{{"pages_per_class", triple(s.pages_per_class)},
                                            {"bins", s.bins},
                                            {"concentration", s.concentration},
                                            {"contrast", s.contrast},
                                            {"seed", static_cast<std::int64_t>(s.seed)}});
  }
  toml::table root{
      {"paths", toml::table{{"manifest", c.paths.manifest},
                            {"cache_dir", c.paths.cache_dir},
                            {"output_dir", c.paths.output_dir},
                            {"codebook", c.paths.codebook},
                            {"model", c.paths.model},
                            {"bof_table", c.paths.bof_table},
                            {"word_features", c.paths.word_features}}},
      {"imgproc", toml::table{{"target_height", c.imgproc.target_height},
                              {"median_window", c.imgproc.median_window},
                              {"deskew_max_angle", c.imgproc.deskew_max_angle},
                              {"deskew_step", c.imgproc.deskew_step}}},
      {"features", toml::table{{"canny_low", c.features.slant.canny.low},
                               {"canny_high", c.features.slant.canny.high},
                               {"canny_sigma", c.features.slant.canny.sigma},
                               {"vote_fraction", c.features.slant.vote_fraction},
                               {"min_votes", c.features.slant.min_votes},
                               {"slope_tolerance", c.features.slant.slope_tolerance},
                               {"stroke_half_band", c.features.stroke.half_band},
                               {"trim_fraction", c.features.stroke.trim_fraction},
                               {"min_char_count", c.box_filter.min_char_count},
                               {"min_aspect", c.box_filter.min_aspect},
                               {"max_aspect", c.box_filter.max_aspect},
                               {"min_height_fraction", c.box_filter.min_height_fraction},
                               {"max_height_fraction", c.box_filter.max_height_fraction},
                               {"max_area_fraction", c.box_filter.max_area_fraction}}},
      {"codebook", toml::table{{"k", c.codebook.k},
                               {"seed", static_cast<std::int64_t>(c.codebook.seed)},
                               {"max_iterations", c.codebook.kmeans.max_iterations},
                               {"tolerance", c.codebook.kmeans.tolerance}}},
      {"llp", toml::table{{"sigma", c.llp.sigma},
                          {"lambda", c.llp.lambda},
                          {"normalize_pairs", c.llp.normalize_pairs},
                          {"max_iterations", c.llp.max_iterations},
                          {"gradient_tolerance", c.llp.gradient_tolerance},
                          {"preconditioner", std::string(to_string(c.llp.preconditioner))}}},
      {"sampler", toml::table{{"batch_size", c.sampler.batch_size},
                              {"strategy", std::string(to_string(c.sampler.strategy))}}},
      {"harness", harness},
      {"service", toml::table{{"host", c.service.host},
                              {"port", c.service.port},
                              {"event_log", c.service.event_log},
                              {"eval_holdout_per_class", c.service.eval_holdout_per_class},
                              {"workers", c.service.workers}}},
  };
  std::ostringstream os;
  os << root << "\n";
  return os.str();
}

}  // namespace fontid
