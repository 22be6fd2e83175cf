#pragma once

#include <stdexcept>
#include <string>

namespace lgocv {

// Error taxonomy. Two families matter at the API boundary: validation errors
// (bad input, recoverable by fixing the input) and numeric errors (the
// computation itself failed). Codes are stable; the C API exposes them.
enum class errc {
  none = 0,
  // validation
  dimension_mismatch,
  bad_param,
  index_out_of_range,
  empty_graph,
  disconnected_graph,
  bad_knots,
  bad_linkage,
  parse_error,
  schema_error,
  rank_deficient,
  // numeric
  not_factorizable,
  no_convergence,
  downdate_indefinite,
  empty_training,
  study_failed,
  internal,
};

inline bool is_validation(errc c) {
  return c >= errc::dimension_mismatch && c <= errc::rank_deficient;
}

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  errc code() const { return code_; }

 private:
  errc code_;
};

class validation_error : public error {
 public:
  using error::error;
};

class numeric_error : public error {
 public:
  using error::error;
};

[[noreturn]] inline void throw_validation(errc c, const std::string& msg) {
  throw validation_error(c, msg);
}

[[noreturn]] inline void throw_numeric(errc c, const std::string& msg) {
  throw numeric_error(c, msg);
}

// no_convergence carries the best point found so far; callers may choose to
// keep it (the CLI reports it and exits with the numeric-failure code).
class no_convergence_error : public numeric_error {
 public:
  no_convergence_error(const std::string& what, int evaluations, double last_step)
      : numeric_error(errc::no_convergence, what),
        evaluations_(evaluations),
        last_step_(last_step) {}
  int evaluations() const { return evaluations_; }
  double last_step() const { return last_step_; }

 private:
  int evaluations_;
  double last_step_;
};

}  // namespace lgocv
