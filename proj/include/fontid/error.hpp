#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fontid {

enum class Errc {
  parse,
  validation,
  parameter,
  out_of_bounds,
  invalid_image,
  no_strokes,
  insufficient_data,
  empty_page,
  insufficient_labels,
  degenerate_training,
  shape,
  empty_pool,
  configuration,
  io,
  not_found,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::parse: return "parse_error";
    case Errc::validation: return "validation_error";
    case Errc::parameter: return "parameter_error";
    case Errc::out_of_bounds: return "out_of_bounds";
    case Errc::invalid_image: return "invalid_image";
    case Errc::no_strokes: return "no_strokes";
    case Errc::insufficient_data: return "insufficient_data";
    case Errc::empty_page: return "empty_page";
    case Errc::insufficient_labels: return "insufficient_labels";
    case Errc::degenerate_training: return "degenerate_training";
    case Errc::shape: return "shape_error";
    case Errc::empty_pool: return "empty_pool";
    case Errc::configuration: return "configuration_error";
    case Errc::io: return "io_error";
    case Errc::not_found: return "not_found";
  }
  return "unknown";
}

// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace fontid
