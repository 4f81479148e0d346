#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nilm {

enum class Errc {
  invalid_argument,
  window_too_short,
  no_valid_targets,
  diverged,
  no_overlap,
  empty_input,
  cannot_fit,
  degenerate_std,
  degenerate_window,
  too_short,
  bad_format,
  corrupt,
  empty,
  undefined_sae,
  io,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::window_too_short: return "window-too-short";
    case Errc::no_valid_targets: return "no-valid-targets";
    case Errc::diverged: return "diverged";
    case Errc::no_overlap: return "no-overlap";
    case Errc::empty_input: return "empty-input";
    case Errc::cannot_fit: return "cannot-fit";
    case Errc::degenerate_std: return "degenerate-std";
    case Errc::degenerate_window: return "degenerate-window";
    case Errc::too_short: return "too-short";
    case Errc::bad_format: return "bad-format";
    case Errc::corrupt: return "corrupt";
    case Errc::empty: return "empty";
    case Errc::undefined_sae: return "undefined-sae";
    case Errc::io: return "io";
  }
  return "unknown";
}

}  // namespace nilm
