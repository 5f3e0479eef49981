#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fontid/error.hpp"
#include "fontid/label.hpp"
#include "fontid/page_features.hpp"
#include "fontid/random.hpp"
#include "fontid/word_features.hpp"

namespace fontid {

// Page-level descriptors plus optional ground truth, the unit of work for
// training, sampling and simulation.
struct BofDataset {
  std::vector<std::string> page_ids;
  std::vector<BofVector> bofs;
  std::vector<std::optional<Label>> labels;

  std::size_t size() const noexcept { return bofs.size(); }
};

// One CSV row per word: page_id, word_index, 18 features.
struct WordFeatureRow {
  std::string page_id;
  int word_index = 0;
  WordFeatureVector features;
};

// Shortest decimal that round-trips through strtod.
inline std::string format_double(double v) {
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline double parse_double_field(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::parse, where + ": not a number: '" + text + "'");
  }
}

inline std::string word_features_header() {
  std::string header = "page_id,word_index";
  for (const auto& name : word_feature_names()) header += "," + name;
  return header;
}

inline void write_word_feature_rows(std::ostream& out, const std::vector<WordFeatureRow>& rows, bool header = true) {
  if (header) out << word_features_header() << "\n";
  for (const auto& row : rows) {
    out << csv_escape(row.page_id) << "," << row.word_index;
    for (double v : row.features.values) out << "," << format_double(v);
    out << "\n";
  }
}

inline std::vector<WordFeatureRow> read_word_feature_rows(std::istream& in, const std::string& source) {
  std::vector<WordFeatureRow> rows;
  std::string line;
  if (!std::getline(in, line)) return rows;
  if (line != word_features_header()) throw Error(Errc::parse, source + ": unexpected word-feature header");
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    const std::string where = source + ":" + std::to_string(line_no);
    if (fields.size() != 2 + kNumWordFeatures) throw Error(Errc::parse, where + ": expected 20 columns");
    WordFeatureRow row;
    row.page_id = fields[0];
    row.word_index = static_cast<int>(parse_double_field(fields[1], where));
    for (std::size_t i = 0; i < kNumWordFeatures; ++i) row.features[i] = parse_double_field(fields[2 + i], where);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<WordFeatureRow> load_word_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open word features: " + path);
  return read_word_feature_rows(in, path);
}

inline void save_word_features(const std::vector<WordFeatureRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write word features: " + path);
  write_word_feature_rows(out, rows);
}

// BoF table: page_id,label,b0..b{k-1}; an empty label marks an unlabeled page.
inline void write_bof_table(std::ostream& out, const BofDataset& data) {
  const std::size_t k = data.bofs.empty() ? 0 : data.bofs.front().size();
  out << "page_id,label";
  for (std::size_t b = 0; b < k; ++b) out << ",b" << b;
  out << "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << csv_escape(data.page_ids[i]) << ",";
    if (data.labels[i]) out << to_string(*data.labels[i]);
    for (double v : data.bofs[i].bins) out << "," << format_double(v);
    out << "\n";
  }
}

inline BofDataset read_bof_table(std::istream& in, const std::string& source) {
  BofDataset data;
  std::string line;
  if (!std::getline(in, line)) return data;
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "page_id" || header[1] != "label") {
    throw Error(Errc::parse, source + ": BoF table header must start with page_id,label");
  }
  const std::size_t k = header.size() - 2;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto fields = split_csv_line(line);
    if (fields.size() != k + 2) throw Error(Errc::parse, where + ": expected " + std::to_string(k + 2) + " columns");
    data.page_ids.push_back(fields[0]);
    data.labels.push_back(fields[1].empty() ? std::nullopt : std::optional<Label>(parse_label(fields[1])));
    BofVector bof;
    for (std::size_t b = 0; b < k; ++b) bof.bins.push_back(parse_double_field(fields[2 + b], where));
    data.bofs.push_back(std::move(bof));
  }
  return data;
}

inline BofDataset load_bof_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open BoF table: " + path);
  return read_bof_table(in, path);
}

inline void save_bof_table(const BofDataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write BoF table: " + path);
  write_bof_table(out, data);
}

// ---------------------------------------------------------------------------
// Synthetic page descriptors

// Dirichlet BoFs. Blackletter puts extra concentration on the first half of
// the bins, Roman on the second half; Mixed uses the average of the two.
struct SyntheticSpec {
  std::array<int, kNumClasses> pages_per_class{300, 300, 300};
  int bins = kDefaultCodebookSize;
  double concentration = 40.0;  // total Dirichlet mass per page
  double contrast = 0.5;        // 0 = identical classes, <1 keeps all alphas positive
  std::uint64_t seed = 1;
};

inline std::array<std::vector<double>, kNumClasses> synthetic_concentrations(const SyntheticSpec& spec) {
  std::array<std::vector<double>, kNumClasses> alpha;
  const double per_bin = spec.concentration / spec.bins;
  for (int b = 0; b < spec.bins; ++b) {
    const double sign = b < spec.bins / 2 ? 1.0 : -1.0;
    alpha[0].push_back(per_bin * (1.0 + spec.contrast * sign));
    alpha[1].push_back(per_bin * (1.0 - spec.contrast * sign));
  }
  for (int b = 0; b < spec.bins; ++b) {
    alpha[2].push_back(0.5 * (alpha[0][static_cast<std::size_t>(b)] + alpha[1][static_cast<std::size_t>(b)]));
  }
  return alpha;
}

inline BofDataset make_synthetic_dataset(const SyntheticSpec& spec) {
  if (spec.bins < 2 || spec.concentration <= 0.0 || spec.contrast < 0.0 || spec.contrast >= 1.0) {
    throw Error(Errc::configuration, "synthetic dataset: bins >= 2, concentration > 0, contrast in [0, 1)");
  }
  const auto alpha = synthetic_concentrations(spec);
  Rng rng(spec.seed);
  BofDataset data;
  int serial = 0;
  // Classes are interleaved so page order carries no label information.
  const int most = *std::max_element(spec.pages_per_class.begin(), spec.pages_per_class.end());
  for (int i = 0; i < most; ++i) {
    for (int c = 0; c < kNumClasses; ++c) {
      if (i >= spec.pages_per_class[static_cast<std::size_t>(c)]) continue;
      BofVector bof;
      double total = 0.0;
      for (double a : alpha[static_cast<std::size_t>(c)]) {
        std::gamma_distribution<double> gamma(a, 1.0);
        bof.bins.push_back(gamma(rng));
        total += bof.bins.back();
      }
      if (total <= 0.0) {
        std::fill(bof.bins.begin(), bof.bins.end(), 1.0 / spec.bins);
      } else {
        for (auto& v : bof.bins) v /= total;
      }
      std::ostringstream id;
      id << "syn" << std::setw(5) << std::setfill('0') << serial++;
      data.page_ids.push_back(id.str());
      data.bofs.push_back(std::move(bof));
      data.labels.push_back(label_from_index(c));
    }
  }
  return data;
}

}  // namespace fontid
