#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "fontid/error.hpp"
#include "fontid/image.hpp"
#include "fontid/label.hpp"

namespace fontid {

struct WordBox {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  int char_count = 0;
  std::optional<std::string> text;

  friend bool operator==(const WordBox&, const WordBox&) = default;
};

struct PageRecord {
  std::string page_id;
  std::string image_path;
  std::vector<WordBox> words;
  std::optional<Label> label;

  friend bool operator==(const PageRecord&, const PageRecord&) = default;
};

// Thresholds for discarding OCR boxes that are unlikely to hold a word.
struct BoxFilter {
  int min_char_count = 1;
  double min_aspect = 0.2;   // width / height
  double max_aspect = 25.0;
  double min_height_fraction = 0.005;
  double max_height_fraction = 0.25;
  double max_area_fraction = 0.20;
};

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& object, const char* key,
                                           const std::string& where) {
  auto it = object.find(key);
  if (it == object.end()) {
    throw Error(Errc::parse, "manifest: missing field '" + where + "." + key + "'");
  }
  return *it;
}

inline int require_int(const nlohmann::json& object, const char* key, const std::string& where) {
  const auto& value = require_field(object, key, where);
  if (!value.is_number_integer()) {
    throw Error(Errc::parse, "manifest: field '" + where + "." + key + "' must be an integer");
  }
  return value.get<int>();
}

inline std::string require_string(const nlohmann::json& object, const char* key,
                                  const std::string& where) {
  const auto& value = require_field(object, key, where);
  if (!value.is_string()) {
    throw Error(Errc::parse, "manifest: field '" + where + "." + key + "' must be a string");
  }
  return value.get<std::string>();
}

inline std::optional<std::string> optional_string(const nlohmann::json& object, const char* key,
                                                  const std::string& where) {
  auto it = object.find(key);
  if (it == object.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw Error(Errc::parse, "manifest: field '" + where + "." + key + "' must be a string or null");
  }
  return it->get<std::string>();
}

}  // namespace detail

inline std::vector<PageRecord> parse_manifest(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::parse, std::string("manifest: ") + e.what());
  }
  if (!doc.is_object()) throw Error(Errc::parse, "manifest: top level must be an object");
  const auto& pages = detail::require_field(doc, "pages", "$");
  if (!pages.is_array()) throw Error(Errc::parse, "manifest: field '$.pages' must be an array");

  std::vector<PageRecord> records;
  records.reserve(pages.size());
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < pages.size(); ++i) {
    const std::string where = "pages[" + std::to_string(i) + "]";
    const auto& entry = pages[i];
    if (!entry.is_object()) throw Error(Errc::parse, "manifest: '" + where + "' must be an object");

    PageRecord page;
    page.page_id = detail::require_string(entry, "page_id", where);
    page.image_path = detail::require_string(entry, "image_path", where);
    if (auto label = detail::optional_string(entry, "label", where)) {
      auto parsed = try_parse_label(*label);
      if (!parsed) {
        throw Error(Errc::validation, "manifest: '" + where + ".label' has unknown label '" + *label +
                                          "' (expected Blackletter, Roman or Mixed)");
      }
      page.label = parsed;
    }
    if (!seen.insert(page.page_id).second) {
      throw Error(Errc::validation, "manifest: duplicate page_id '" + page.page_id + "' at " + where);
    }

    const auto& words = detail::require_field(entry, "words", where);
    if (!words.is_array()) throw Error(Errc::parse, "manifest: field '" + where + ".words' must be an array");
    page.words.reserve(words.size());
    for (std::size_t j = 0; j < words.size(); ++j) {
      const std::string wwhere = where + ".words[" + std::to_string(j) + "]";
      const auto& w = words[j];
      if (!w.is_object()) throw Error(Errc::parse, "manifest: '" + wwhere + "' must be an object");
      WordBox box;
      box.x = detail::require_int(w, "x", wwhere);
      box.y = detail::require_int(w, "y", wwhere);
      box.width = detail::require_int(w, "w", wwhere);
      box.height = detail::require_int(w, "h", wwhere);
      box.char_count = detail::require_int(w, "char_count", wwhere);
      box.text = detail::optional_string(w, "text", wwhere);
      if (box.width <= 0 || box.height <= 0) {
        throw Error(Errc::validation, "manifest: '" + wwhere + "' must have positive w and h");
      }
      if (box.char_count < 0) {
        throw Error(Errc::validation, "manifest: '" + wwhere + ".char_count' must be nonnegative");
      }
      page.words.push_back(std::move(box));
    }
    records.push_back(std::move(page));
  }
  return records;
}

// Image paths are not touched here; a missing scan surfaces when it is read.
inline std::vector<PageRecord> load_dataset(const std::string& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open manifest: " + manifest_path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_manifest(buffer.str());
}

inline nlohmann::json manifest_to_json(const std::vector<PageRecord>& pages) {
  nlohmann::json out;
  out["pages"] = nlohmann::json::array();
  for (const auto& page : pages) {
    nlohmann::json entry;
    entry["page_id"] = page.page_id;
    entry["image_path"] = page.image_path;
    entry["label"] = page.label ? nlohmann::json(std::string(to_string(*page.label))) : nlohmann::json(nullptr);
    entry["words"] = nlohmann::json::array();
    for (const auto& w : page.words) {
      entry["words"].push_back({{"x", w.x}, {"y", w.y}, {"w", w.width}, {"h", w.height},
                                {"char_count", w.char_count},
                                {"text", w.text ? nlohmann::json(*w.text) : nlohmann::json(nullptr)}});
    }
    out["pages"].push_back(std::move(entry));
  }
  return out;
}

inline bool keep_word_box(const WordBox& box, int page_width, int page_height, const BoxFilter& filter) {
  if (box.char_count < filter.min_char_count) return false;
  if (box.width <= 0 || box.height <= 0) return false;
  const double aspect = static_cast<double>(box.width) / box.height;
  if (aspect < filter.min_aspect || aspect > filter.max_aspect) return false;
  const double height_fraction = static_cast<double>(box.height) / page_height;
  if (height_fraction < filter.min_height_fraction || height_fraction > filter.max_height_fraction) return false;
  const double area_fraction = static_cast<double>(box.width) * box.height /
                               (static_cast<double>(page_width) * page_height);
  return area_fraction <= filter.max_area_fraction;
}

inline PageRecord filter_word_boxes(const PageRecord& page, int page_width, int page_height,
                                    const BoxFilter& filter = {}) {
  if (page_width <= 0 || page_height <= 0) {
    throw Error(Errc::parameter, "filter_word_boxes: page dimensions must be positive");
  }
  PageRecord out = page;
  out.words.clear();
  for (const auto& box : page.words) {
    if (keep_word_box(box, page_width, page_height, filter)) out.words.push_back(box);
  }
  return out;
}

// Copies the part of `box` that overlaps the image.
inline GrayImage crop_word(const GrayImage& page_image, const WordBox& box) {
  const long x0 = std::max<long>(box.x, 0);
  const long y0 = std::max<long>(box.y, 0);
  const long x1 = std::min<long>(static_cast<long>(box.x) + box.width, page_image.width());
  const long y1 = std::min<long>(static_cast<long>(box.y) + box.height, page_image.height());
  if (x1 <= x0 || y1 <= y0) {
    throw Error(Errc::out_of_bounds, "crop_word: box (" + std::to_string(box.x) + "," + std::to_string(box.y) +
                                         "," + std::to_string(box.width) + "x" + std::to_string(box.height) +
                                         ") lies outside the image");
  }
  GrayImage crop(static_cast<int>(x1 - x0), static_cast<int>(y1 - y0));
  for (long y = y0; y < y1; ++y) {
    for (long x = x0; x < x1; ++x) {
      crop.at(static_cast<int>(x - x0), static_cast<int>(y - y0)) =
          page_image.at(static_cast<int>(x), static_cast<int>(y));
    }
  }
  return crop;
}

// Minimal hOCR reader: one WordBox per `ocrx_word` span, bbox from its title.
inline PageRecord page_from_hocr(const std::string& hocr, std::string page_id, std::string image_path) {
  PageRecord page;
  page.page_id = std::move(page_id);
  page.image_path = std::move(image_path);
  static const std::regex word_re(
      R"(<span[^>]*class=['"]ocrx_word['"][^>]*title=['"][^'"]*bbox (\d+) (\d+) (\d+) (\d+)[^'"]*['"][^>]*>([\s\S]*?)</span>)");
  static const std::regex tag_re(R"(<[^>]*>)");
  for (auto it = std::sregex_iterator(hocr.begin(), hocr.end(), word_re); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    WordBox box;
    const int x0 = std::stoi(m[1].str());
    const int y0 = std::stoi(m[2].str());
    const int x1 = std::stoi(m[3].str());
    const int y1 = std::stoi(m[4].str());
    box.x = x0;
    box.y = y0;
    box.width = x1 - x0;
    box.height = y1 - y0;
    std::string text = std::regex_replace(m[5].str(), tag_re, "");
    text.erase(std::remove_if(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); }),
               text.end());
    // UTF-8 code points, not bytes.
    box.char_count = static_cast<int>(
        std::count_if(text.begin(), text.end(), [](unsigned char c) { return (c & 0xC0) != 0x80; }));
    box.text = text;
    if (box.width > 0 && box.height > 0) page.words.push_back(std::move(box));
  }
  return page;
}

}  // namespace fontid
