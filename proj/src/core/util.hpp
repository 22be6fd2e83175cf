#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lgocv {

// Pairwise summation: error grows O(log n) instead of O(n), and the result
// does not depend on accumulation chunking, which keeps aggregate scores
// reproducible across runs.
inline double pairwise_sum(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return 0.0;
  if (n <= 16) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

inline double pairwise_mean(std::span<const double> x) {
  return x.empty() ? 0.0 : pairwise_sum(x) / static_cast<double>(x.size());
}

// Shortest decimal that round-trips to the same double; used for CSV output.
std::string format_double(double v);

}  // namespace lgocv
