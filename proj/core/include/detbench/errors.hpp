#pragma once

#include <stdexcept>
#include <string>

namespace detbench {

// Error codes cover every failure mode surfaced by the public API.
// Codes in the data group map to CLI exit code 2, everything else to 3.
enum class Errc {
  // data errors: malformed or missing input files
  malformed_line,
  out_of_range,
  unknown_class,
  missing_file,
  missing_confidence,
  decode_error,
  // config / contract errors
  bad_ratios,
  bad_config,
  empty_list,
  no_ground_truth,
  epoch_out_of_range,
  non_monotone_epoch,
  length_mismatch,
  channel_mismatch,
  odd_channels,
  too_small,
  shape_mismatch,
  degenerate_transform,
  wrong_arity,
  too_few_samples,
  io_error,
};

class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

private:
  Errc code_;
};

inline bool is_data_error(Errc c) {
  switch (c) {
    case Errc::malformed_line:
    case Errc::out_of_range:
    case Errc::unknown_class:
    case Errc::missing_file:
    case Errc::missing_confidence:
    case Errc::decode_error:
      return true;
    default:
      return false;
  }
}

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace detbench
