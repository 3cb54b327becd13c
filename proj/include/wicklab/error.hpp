#pragma once

#include <stdexcept>
#include <string>

namespace wicklab {

enum class Errc {
  invalid_argument,
  mixed_node_sets,
  boundary_ambiguity,
  unsupported_factor,
  quadrature_divergence,
  insufficient_range,
  no_exact_tag,
  degenerate_points,
  degree_too_large,
  non_psd,
  missing_factor,
};

const char* errc_name(Errc code) noexcept;

/// Library exception; `code()` identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::mixed_node_sets: return "MixedNodeSets";
    case Errc::boundary_ambiguity: return "BoundaryAmbiguity";
    case Errc::unsupported_factor: return "UnsupportedFactor";
    case Errc::quadrature_divergence: return "QuadratureDivergence";
    case Errc::insufficient_range: return "InsufficientRange";
    case Errc::no_exact_tag: return "NoExactTag";
    case Errc::degenerate_points: return "DegeneratePoints";
    case Errc::degree_too_large: return "DegreeTooLarge";
    case Errc::non_psd: return "NonPSD";
    case Errc::missing_factor: return "MissingFactor";
  }
  return "Unknown";
}

}  // namespace wicklab
