#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "matd3/errors.hpp"

namespace matd3::harness {

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw Error("mean of empty sample");
  double s = 0.0;
  for (const double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_stddev(const std::vector<double>& v) {
  if (v.size() < 2) throw Error("sample_stddev needs at least two values");
  const double m = mean(v);
  double ss = 0.0;
  for (const double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// 97.5% Student-t quantile (two-sided 95% interval), df 1..40 tabulated,
/// normal quantile beyond.
inline double t_quantile_975(int df) {
  static constexpr double kTable[40] = {
      12.7062047364321, 4.30265272969614, 3.18244630528426, 2.7764451051978,
      2.57058183563631, 2.44691185114497, 2.36462425159278, 2.30600413520417,
      2.2621571628541,  2.22813885196494, 2.20098516008295, 2.17881282966342,
      2.16036865646101, 2.14478668791693, 2.13144954555932, 2.11990529922101,
      2.10981557783318, 2.10092204024096, 2.09302405440826, 2.08596344726584,
      2.07961384472766, 2.07387306790401, 2.06865761041904, 2.06389856162802,
      2.05953855275329, 2.05552943864287, 2.05183051648028, 2.04840714179524,
      2.0452296421327,  2.04227245630124, 2.03951344639641, 2.0369333434601,
      2.03451529744934, 2.03224450931772, 2.03010792825034, 2.02809400098045,
      2.02619246302911, 2.02439416391197, 2.02269092003676, 2.02107539030627};
  if (df < 1) throw Error("t_quantile_975: df must be >= 1");
  if (df <= 40) return kTable[df - 1];
  return 1.95996398454005;
}

/// Half-width of the normal-theory 95% CI of the mean: t * s / sqrt(n).
/// NaN for fewer than two values (spec: CI absent below two runs).
inline double ci95_half_width(const std::vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const int n = static_cast<int>(v.size());
  return t_quantile_975(n - 1) * sample_stddev(v) / std::sqrt(static_cast<double>(n));
}

}  // namespace matd3::harness
