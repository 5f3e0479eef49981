#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include "fontid/config.hpp"
#include "fontid/report.hpp"
#include "support.hpp"

using namespace fontid;

namespace {

RepeatedResult result_for(Strategy s, double base) {
  std::vector<LearningCurve> curves;
  for (int rep = 0; rep < 2; ++rep) {
    LearningCurve c;
    c.strategy = s;
    c.seed = 100 + static_cast<std::uint64_t>(rep);
    for (std::size_t k = 0; k < 3; ++k) {
      c.points.push_back({3 + 20 * k, base + 0.1 * static_cast<double>(k) + 0.01 * rep, {0.5, 0.25, std::nan("")}});
    }
    curves.push_back(c);
  }
  return summarize_curves(s, curves);
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> series_order(const std::string& html) {
  std::vector<std::string> out;
  const std::regex re("data-strategy=\"([A-Za-z0-9]+)\"");
  for (auto it = std::sregex_iterator(html.begin(), html.end(), re); it != std::sregex_iterator(); ++it) {
    out.push_back((*it)[1]);
  }
  return out;
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

// ---------------------------------------------------------------------------
// Report

TEST(Report, EmptyResultsGiveHeaderOnlyCsvs) {
  testing_support::TempDir dir("report_empty");
  const auto files = emit_report({}, dir.path());
  auto read = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  EXPECT_EQ(read(files.curves), std::string(kCurveCsvHeader) + "\n");
  EXPECT_EQ(read(files.mean_curves), std::string(kMeanCurveCsvHeader) + "\n");
  EXPECT_EQ(read(files.auc_summary), std::string(kAucCsvHeader) + "\n");
  EXPECT_EQ(read(files.auc_per_rep), std::string(kAucPerRepHeader) + "\n");
  EXPECT_TRUE(series_order(read(files.html)).empty());
}

TEST(Report, OneStrategyOneSeries) {
  std::vector<RepeatedResult> results{result_for(Strategy::s5, 0.5)};
  const auto html = render_report_html(results);
  EXPECT_EQ(series_order(html), std::vector<std::string>{"S5"});
  EXPECT_NE(html.find("<!DOCTYPE html>"), std::string::npos);
}

TEST(Report, SevenStrategiesInFixedLegendOrder) {
  std::vector<RepeatedResult> results;
  for (Strategy s : {Strategy::random, Strategy::s6, Strategy::s3, Strategy::s1, Strategy::s5, Strategy::s2,
                     Strategy::s4}) {
    results.push_back(result_for(s, 0.3));
  }
  const std::vector<std::string> want{"S1", "S2", "S3", "S4", "S5", "S6", "Random"};
  EXPECT_EQ(series_order(render_report_html(results)), want);

  std::ostringstream auc;
  write_auc_csv(auc, results);
  const auto rows = lines_of(auc.str());
  ASSERT_EQ(rows.size(), 8u);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_EQ(rows[i + 1].substr(0, rows[i + 1].find(',')), want[i]);
}

TEST(Report, CsvContents) {
  std::vector<RepeatedResult> results{result_for(Strategy::s1, 0.5)};
  std::ostringstream curves;
  write_curves_csv(curves, results);
  const auto rows = lines_of(curves.str());
  ASSERT_EQ(rows.size(), 1u + 6u);
  EXPECT_EQ(rows[0], kCurveCsvHeader);
  EXPECT_EQ(rows[1], "S1,0,100,3,0.5,0.5,0.25,");  // missing recall is an empty cell

  std::ostringstream mean;
  write_mean_curves_csv(mean, results);
  const auto mrows = lines_of(mean.str());
  ASSERT_EQ(mrows.size(), 4u);
  EXPECT_EQ(mrows[1].substr(0, 9), "S1,3,2,0.");

  std::ostringstream per_rep;
  write_auc_per_rep_csv(per_rep, results);
  EXPECT_EQ(lines_of(per_rep.str()).size(), 3u);
}

TEST(Report, CurvesCsvRoundTrip) {
  std::vector<RepeatedResult> results{result_for(Strategy::s2, 0.4), result_for(Strategy::random, 0.2)};
  std::stringstream csv;
  write_curves_csv(csv, results);
  const auto back = read_curves_csv(csv, "mem");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].strategy, Strategy::s2);
  EXPECT_EQ(back[0].curves.size(), 2u);
  EXPECT_EQ(back[0].curves[1].seed, 101u);
  EXPECT_DOUBLE_EQ(back[0].mean_auc, results[0].mean_auc);
  EXPECT_TRUE(std::isnan(back[1].curves[0].points[0].recall[2]));
}

TEST(Report, BadCurvesCsvIsParseError) {
  std::istringstream wrong_header("a,b\n");
  EXPECT_THROW(read_curves_csv(wrong_header, "x.csv"), Error);
  std::istringstream short_row(std::string(kCurveCsvHeader) + "\nS1,0,1\n");
  try {
    read_curves_csv(short_row, "x.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::parse);
    EXPECT_NE(std::string(e.what()).find("x.csv:2"), std::string::npos);
  }
}

TEST(Report, UnwritableDirectoryNamesPath) {
  testing_support::TempDir dir("report_blocked");
  const auto blocker = dir / "file";
  std::ofstream(blocker) << "x";
  try {
    emit_report({}, blocker / "sub");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::io);
    EXPECT_NE(std::string(e.what()).find(blocker.string()), std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// Config

TEST(Config, EmptyDocumentGivesDefaults) {
  const auto c = parse_config("");
  EXPECT_EQ(c.llp.sigma, 300.0);
  EXPECT_EQ(c.llp.lambda, 0.1);
  EXPECT_EQ(c.llp.max_iterations, 2000);
  EXPECT_EQ(c.sampler.batch_size, 20);
  EXPECT_EQ(c.sampler.strategy, Strategy::s5);
  EXPECT_EQ(c.harness.repetitions, 20);
  EXPECT_EQ(c.codebook.k, 20);
  const std::array<int, 3> want{200, 200, 200};
  EXPECT_EQ(c.harness.test_per_class, want);
  EXPECT_FALSE(c.harness.synthetic);
}

TEST(Config, ParsesEverySection) {
  const auto c = parse_config(R"(
[paths]
manifest = "m.json"
cache_dir = "cache"

[imgproc]
target_height = 80
median_window = 5

[features]
canny_low = 0.1
canny_high = 0.3
min_char_count = 2

[codebook]
k = 12
seed = 4

[llp]
sigma = 0.5
lambda = 0.0
normalize_pairs = false
preconditioner = "whiten"

[sampler]
batch_size = 10
strategy = "random"

[harness]
strategies = ["S1", "S5", "Random"]
repetitions = 3
seed = 9
test_per_class = [10, 11, 12]

[harness.synthetic]
pages_per_class = [50, 60, 70]
concentration = 30.0

[service]
port = 0
workers = 2
)");
  EXPECT_EQ(c.paths.manifest, "m.json");
  EXPECT_EQ(c.imgproc.target_height, 80);
  EXPECT_EQ(c.imgproc.median_window, 5);
  EXPECT_EQ(c.features.slant.canny.low, 0.1);
  EXPECT_EQ(c.box_filter.min_char_count, 2);
  EXPECT_EQ(c.codebook.k, 12);
  EXPECT_EQ(c.llp.sigma, 0.5);
  EXPECT_FALSE(c.llp.normalize_pairs);
  EXPECT_EQ(c.llp.preconditioner, Preconditioner::whiten);
  EXPECT_EQ(c.sampler.strategy, Strategy::random);
  const std::vector<Strategy> strategies{Strategy::s1, Strategy::s5, Strategy::random};
  EXPECT_EQ(c.harness.strategies, strategies);
  ASSERT_TRUE(c.harness.synthetic);
  EXPECT_EQ(c.harness.synthetic->pages_per_class[2], 70);
  EXPECT_EQ(c.harness.synthetic->concentration, 30.0);
  EXPECT_EQ(c.service.port, 0);

  const auto e = c.experiment();
  EXPECT_EQ(e.batch_size, 10);
  EXPECT_EQ(e.repetitions, 3);
  EXPECT_EQ(e.llp.lambda, 0.0);
}

TEST(Config, EveryViolationIsReported) {
  const std::string msg = config_error(R"(
[llp]
sigma = -1.0
[sampler]
batch_size = 0
[imgproc]
median_window = 4
)");
  EXPECT_NE(msg.find("3 configuration error(s)"), std::string::npos) << msg;
  EXPECT_NE(msg.find("llp.sigma must be > 0"), std::string::npos);
  EXPECT_NE(msg.find("sampler.batch_size must be >= 1"), std::string::npos);
  EXPECT_NE(msg.find("imgproc.median_window"), std::string::npos);
}

TEST(Config, UnknownKeysAndSectionsAreErrors) {
  EXPECT_NE(config_error("[llp]\nsigmaa = 3.0\n").find("unknown key llp.sigmaa"), std::string::npos);
  EXPECT_NE(config_error("[llp]\npreconditioner = \"cholesky\"\n").find("unknown preconditioner 'cholesky'"),
            std::string::npos);
  EXPECT_NE(config_error("[lpp]\nsigma = 3.0\n").find("unknown section [lpp]"), std::string::npos);
  EXPECT_NE(config_error("[harness.synthetic]\nbin = 3\n").find("unknown key harness.synthetic.bin"),
            std::string::npos);
}

TEST(Config, TypeErrors) {
  EXPECT_NE(config_error("[llp]\nmax_iterations = \"many\"\n").find("llp.max_iterations: expected an integer"),
            std::string::npos);
  EXPECT_NE(config_error("[sampler]\nstrategy = \"S9\"\n").find("unknown strategy 'S9'"), std::string::npos);
  EXPECT_NE(config_error("[harness]\nstrategies = [\"S1\", \"S7\"]\n").find("harness.strategies"), std::string::npos);
  EXPECT_NE(config_error("[harness]\ntest_per_class = [1, 2]\n").find("blackletter, roman, mixed"),
            std::string::npos);
  EXPECT_NE(config_error("[codebook]\nseed = -1\n").find("non-negative"), std::string::npos);
}

TEST(Config, SyntaxErrorIsParseErrorWithLocation) {
  try {
    parse_config("[llp\nsigma = 1\n", "bad.toml");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::parse);
    EXPECT_EQ(std::string(e.what()).rfind("bad.toml:1:", 0), 0u) << e.what();
  }
}

TEST(Config, EnvironmentOverridesCacheDir) {
  ::setenv(kCacheDirEnv, "/tmp/from-env", 1);
  const auto c = parse_config("[paths]\ncache_dir = \"from-file\"\n");
  ::unsetenv(kCacheDirEnv);
  EXPECT_EQ(c.paths.cache_dir, "/tmp/from-env");
  EXPECT_EQ(parse_config("[paths]\ncache_dir = \"from-file\"\n").paths.cache_dir, "from-file");
}

TEST(Config, EffectiveConfigRoundTrips) {
  auto c = parse_config("[llp]\nlambda = 0.25\npreconditioner = \"none\"\n[harness.synthetic]\nseed = 5\n");
  const auto again = parse_config(config_to_toml(c));
  EXPECT_EQ(again.llp.lambda, 0.25);
  EXPECT_EQ(again.llp.preconditioner, Preconditioner::none);
  ASSERT_TRUE(again.harness.synthetic);
  EXPECT_EQ(again.harness.synthetic->seed, 5u);
  EXPECT_EQ(config_to_toml(again), config_to_toml(c));
}

TEST(Config, ShippedSampleMatchesDefaults) {
  const auto c = load_config(std::string(FONTID_SOURCE_DIR) + "/samples/config.toml");
  ToolConfig expected;
  expected.paths.manifest = "samples/manifest.json";
  expected.harness.strategies = {Strategy::s1, Strategy::s2, Strategy::s3, Strategy::s4,
                                 Strategy::s5, Strategy::s6, Strategy::random};
  expected.harness.synthetic = SyntheticSpec{};
  EXPECT_EQ(config_to_toml(c), config_to_toml(expected));
}

TEST(Config, MissingFileIsIoError) {
  try {
    load_config("/nonexistent/fontid.toml");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::io);
    EXPECT_NE(std::string(e.what()).find("/nonexistent/fontid.toml"), std::string::npos);
  }
}
