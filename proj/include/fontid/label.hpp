#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>

#include "fontid/error.hpp"

namespace fontid {

enum class Label : int { blackletter = 0, roman = 1, mixed = 2 };

inline constexpr int kNumClasses = 3;
inline constexpr std::array<Label, kNumClasses> kAllLabels = {Label::blackletter, Label::roman, Label::mixed};

inline constexpr int index_of(Label label) noexcept { return static_cast<int>(label); }

inline std::string_view to_string(Label label) {
  switch (label) {
    case Label::blackletter: return "Blackletter";
    case Label::roman: return "Roman";
    case Label::mixed: return "Mixed";
  }
  return "?";
}

// Case-insensitive; nullopt for anything outside the closed set.
inline std::optional<Label> try_parse_label(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "blackletter") return Label::blackletter;
  if (lower == "roman") return Label::roman;
  if (lower == "mixed") return Label::mixed;
  return std::nullopt;
}

inline Label parse_label(std::string_view text) {
  if (auto label = try_parse_label(text)) return *label;
  throw Error(Errc::validation,
              "unknown label '" + std::string(text) + "' (expected Blackletter, Roman or Mixed)");
}

inline Label label_from_index(int index) {
  if (index < 0 || index >= kNumClasses) {
    throw Error(Errc::validation, "class index out of range: " + std::to_string(index));
  }
  return static_cast<Label>(index);
}

}  // namespace fontid
