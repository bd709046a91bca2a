#pragma once

#include <stdexcept>
#include <string>

namespace schottky_spectral {

// Specific failure conditions raised by the library.
enum class Errc {
  io,
  parse,
  invalid_data,
  non_reduced_word,
  letter_out_of_range,
  pole,
  affine_matrix,
  non_hyperbolic,
  pole_in_interval,
  tau_out_of_range,
  non_integral,
  non_partition,
  branch_cut,
  basis_overflow,
  dimension_cap,
  overflow,
  quadrature,
  zero_on_contour,
  phase_step,
  parameter_range,
  infeasible,
  enumeration_cap,
  outside_disk,
  zero_argument,
  no_convergence,
};

// Process exit code associated with each condition: 1 IO/parse, 2 validation,
// 3 numeric failure, 4 infeasible parameters.
inline int exit_code(Errc e) {
  switch (e) {
    case Errc::io:
    case Errc::parse:
      return 1;
    case Errc::invalid_data:
    case Errc::non_integral:
    case Errc::letter_out_of_range:
    case Errc::non_reduced_word:
      return 2;
    case Errc::tau_out_of_range:
    case Errc::parameter_range:
    case Errc::infeasible:
    case Errc::enumeration_cap:
    case Errc::dimension_cap:
    case Errc::basis_overflow:
    case Errc::zero_argument:
      return 4;
    default:
      return 3;
  }
}

inline const char* errc_name(Errc e) {
  switch (e) {
    case Errc::io: return "io";
    case Errc::parse: return "parse";
    case Errc::invalid_data: return "invalid_data";
    case Errc::non_reduced_word: return "non_reduced_word";
    case Errc::letter_out_of_range: return "letter_out_of_range";
    case Errc::pole: return "pole";
    case Errc::affine_matrix: return "affine_matrix";
    case Errc::non_hyperbolic: return "non_hyperbolic";
    case Errc::pole_in_interval: return "pole_in_interval";
    case Errc::tau_out_of_range: return "tau_out_of_range";
    case Errc::non_integral: return "non_integral";
    case Errc::non_partition: return "non_partition";
    case Errc::branch_cut: return "branch_cut";
    case Errc::basis_overflow: return "basis_overflow";
    case Errc::dimension_cap: return "dimension_cap";
    case Errc::overflow: return "overflow";
    case Errc::quadrature: return "quadrature";
    case Errc::zero_on_contour: return "zero_on_contour";
    case Errc::phase_step: return "phase_step";
    case Errc::parameter_range: return "parameter_range";
    case Errc::infeasible: return "infeasible";
    case Errc::enumeration_cap: return "enumeration_cap";
    case Errc::outside_disk: return "outside_disk";
    case Errc::zero_argument: return "zero_argument";
    case Errc::no_convergence: return "no_convergence";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }
  int exit_code() const noexcept { return schottky_spectral::exit_code(code_); }

 private:
  Errc code_;
};

}  // namespace schottky_spectral
