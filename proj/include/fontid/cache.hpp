#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include "fontid/dataset.hpp"
#include "fontid/error.hpp"
#include "fontid/image_io.hpp"
#include "fontid/imgproc.hpp"
#include "fontid/ingest.hpp"
#include "fontid/page_features.hpp"
#include "fontid/word_features.hpp"

namespace fontid {

// Everything that influences a page's word features.
struct FeaturePipeline {
  PreprocessParams preprocess;
  BoxFilter filter;
  WordFeatureParams features;
};

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::io, "SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

inline std::string pipeline_signature(const FeaturePipeline& p) {
  std::ostringstream os;
  const auto& s = p.features.slant;
  os << "schema=" << feature_schema_hash() << ";pre=" << p.preprocess.target_height << "," << p.preprocess.median_window
     << "," << format_double(p.preprocess.deskew_max_angle) << "," << format_double(p.preprocess.deskew_step)
     << ";filter=" << p.filter.min_char_count << "," << format_double(p.filter.min_aspect) << ","
     << format_double(p.filter.max_aspect) << "," << format_double(p.filter.min_height_fraction) << ","
     << format_double(p.filter.max_height_fraction) << "," << format_double(p.filter.max_area_fraction)
     << ";stroke=" << p.features.stroke.half_band << "," << format_double(p.features.stroke.trim_fraction)
     << ";slant=" << format_double(s.canny.low) << "," << format_double(s.canny.high) << ","
     << format_double(s.canny.sigma) << "," << s.canny.kernel_size << "," << format_double(s.vote_fraction) << ","
     << s.min_votes << "," << (s.vote_threshold ? std::to_string(*s.vote_threshold) : "auto") << ","
     << format_double(s.slope_center) << "," << format_double(s.slope_tolerance);
  return os.str();
}

// Content key: image bytes, word boxes and every pipeline parameter.
inline std::string page_cache_key(const std::vector<std::uint8_t>& image_bytes, const PageRecord& page,
                                  const FeaturePipeline& pipeline) {
  std::string material = sha256_hex(std::string_view(reinterpret_cast<const char*>(image_bytes.data()),
                                                     image_bytes.size()));
  material += "\n";
  for (const auto& w : page.words) {
    material += std::to_string(w.x) + "," + std::to_string(w.y) + "," + std::to_string(w.width) + "," +
                std::to_string(w.height) + "," + std::to_string(w.char_count) + ";";
  }
  material += "\n" + pipeline_signature(pipeline);
  return sha256_hex(material);
}

struct PageFeatureResult {
  std::vector<WordFeatureRow> rows;
  std::size_t words_skipped = 0;  // filtered boxes plus words without measurable strokes
};

// Word features of one decoded page. Row word_index refers to the manifest order.
inline PageFeatureResult compute_page_features(const PageRecord& page, const GrayImage& image,
                                               const FeaturePipeline& pipeline) {
  PageFeatureResult result;
  for (std::size_t i = 0; i < page.words.size(); ++i) {
    const WordBox& box = page.words[i];
    if (!keep_word_box(box, image.width(), image.height(), pipeline.filter)) {
      ++result.words_skipped;
      continue;
    }
    try {
      const GrayImage word = preprocess_word(crop_word(image, box), pipeline.preprocess);
      WordFeatureRow row;
      row.page_id = page.page_id;
      row.word_index = static_cast<int>(i);
      row.features = extract_word_features(word, box.char_count, pipeline.features);
      result.rows.push_back(std::move(row));
    } catch (const Error& e) {
      if (e.code() != Errc::no_strokes && e.code() != Errc::out_of_bounds && e.code() != Errc::invalid_image) throw;
      ++result.words_skipped;
    }
  }
  return result;
}

struct CacheSummary {
  std::size_t hits = 0;
  std::size_t misses = 0;
  std::size_t failures = 0;
  std::vector<std::string> diagnostics;
  std::vector<std::vector<WordFeatureRow>> per_page;  // manifest order; empty for failed pages
  std::vector<bool> ok;

  std::vector<WordFeatureRow> all_rows() const {
    std::vector<WordFeatureRow> out;
    for (const auto& rows : per_page) out.insert(out.end(), rows.begin(), rows.end());
    return out;
  }
};

// Relative image paths resolve against `base_dir`.
inline CacheSummary cache_features(const std::vector<PageRecord>& pages, const FeaturePipeline& pipeline,
                                   const std::filesystem::path& cache_dir, const std::filesystem::path& base_dir = {},
                                   int workers = 1) {
  std::error_code ec;
  std::filesystem::create_directories(cache_dir, ec);
  if (ec) throw Error(Errc::io, "cannot create cache directory " + cache_dir.string() + ": " + ec.message());

  enum class Outcome { hit, miss, failure };
  std::vector<Outcome> outcome(pages.size(), Outcome::failure);
  std::vector<std::string> message(pages.size());
  CacheSummary summary;
  summary.per_page.resize(pages.size());
  summary.ok.assign(pages.size(), false);

  auto process = [&](std::size_t i) {
    const PageRecord& page = pages[i];
    std::filesystem::path image_path(page.image_path);
    if (image_path.is_relative() && !base_dir.empty()) image_path = base_dir / image_path;
    try {
      const auto bytes = read_file_bytes(image_path.string());
      const std::string key = page_cache_key(bytes, page, pipeline);
      const auto cached = cache_dir / (key + ".csv");
      if (std::filesystem::exists(cached)) {
        std::ifstream in(cached, std::ios::binary);
        summary.per_page[i] = read_word_feature_rows(in, cached.string());
        outcome[i] = Outcome::hit;
      } else {
        const GrayImage image = decode_image(bytes, image_path.string());
        auto rows = compute_page_features(page, image, pipeline).rows;
        const auto tmp = cache_dir / (key + ".csv.tmp" + std::to_string(i));
        {
          std::ofstream out(tmp, std::ios::binary);
          if (!out) throw Error(Errc::io, "cannot write " + tmp.string());
          write_word_feature_rows(out, rows);
        }
        std::filesystem::rename(tmp, cached);
        summary.per_page[i] = std::move(rows);
        outcome[i] = Outcome::miss;
      }
      summary.ok[i] = true;
    } catch (const std::exception& e) {
      outcome[i] = Outcome::failure;
      message[i] = "page " + page.page_id + ": " + e.what();
    }
  };

  const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(pages.size())));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < n_workers; ++t) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < pages.size(); i = next++) process(i);
    });
  }
  for (auto& t : threads) t.join();

  for (std::size_t i = 0; i < pages.size(); ++i) {
    switch (outcome[i]) {
      case Outcome::hit: ++summary.hits; break;
      case Outcome::miss: ++summary.misses; break;
      case Outcome::failure:
        ++summary.failures;
        summary.diagnostics.push_back(message[i]);
        break;
    }
  }
  return summary;
}

}  // namespace fontid
