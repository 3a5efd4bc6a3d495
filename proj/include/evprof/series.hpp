#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "error.hpp"

namespace evprof {

// Uniformly sampled real series (amperes for pilot/current).
struct TimeSeries {
  std::vector<double> values;
  double sample_period = 1.0;

  std::size_t size() const noexcept { return values.size(); }
  bool empty() const noexcept { return values.empty(); }
  double operator[](std::size_t i) const { return values[i]; }

  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;
};

inline void validate(const TimeSeries& ts, const std::string& what) {
  if (ts.values.empty()) throw Error(ErrorKind::parameter, what + ": empty series");
  if (!(ts.sample_period > 0.0) || !std::isfinite(ts.sample_period))
    throw Error(ErrorKind::parameter, what + ": sample period must be positive");
  for (double v : ts.values)
    if (!std::isfinite(v)) throw Error(ErrorKind::parameter, what + ": non-finite sample");
}

}  // namespace evprof
