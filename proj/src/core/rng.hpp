#pragma once

#include <array>
#include <cstdint>

namespace lgocv {

// Philox4x32-10 counter-based generator. Streams are addressed by
// (seed, stream, counter), so draw k of stream s is the same number no matter
// how many threads run or in what order values are consumed. That property is
// what makes simulation output and Monte Carlo summaries bit-reproducible.
class Philox {
 public:
  Philox(std::uint64_t seed, std::uint64_t stream = 0);

  // Raw 64-bit word at the current position; advances the counter.
  std::uint64_t next_u64();

  // Uniform on (0,1), never returning 0 or 1.
  double uniform();

  // Standard normal via inverse CDF; exact function of one uniform, so the
  // draw count per variate is fixed.
  double normal();

  // Poisson by inversion (splitting large means), again a deterministic
  // function of the stream position.
  std::int64_t poisson(double mean);

  // Jump to an absolute draw index within the stream.
  void set_counter(std::uint64_t counter);

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int block_pos_ = 2;  // 2 u64 per block

  void refill();
};

// Inverse standard normal CDF (Wichura's PPND16), |error| < 1e-15 over (0,1).
double inverse_normal_cdf(double p);

}  // namespace lgocv
