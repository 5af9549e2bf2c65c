#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>

#include "mve/error.hpp"
#include "mve/eval.hpp"

namespace mve {

TTestResult paired_t_test_bonferroni(std::span<const double> a, std::span<const double> b,
                                     std::size_t num_comparisons, double alpha) {
  if (a.size() != b.size()) {
    throw InvalidInput("paired samples differ in length (" + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()) + ")");
  }
  if (a.size() < 2) throw InvalidInput("paired t-test needs at least 2 pairs");
  if (num_comparisons < 1) throw InvalidConfig("num_comparisons must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidConfig("alpha must lie in (0, 1)");

  const auto n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  bool all_zero = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) all_zero = false;
    ss += (d - mean) * (d - mean);
  }
  if (all_zero) return {0.0, 1.0, false};

  const double threshold = alpha / static_cast<double>(num_comparisons);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0) {
    // constant non-zero shift: the statistic is unbounded
    const double t = std::copysign(std::numeric_limits<double>::infinity(), mean);
    return {t, 0.0, 0.0 < threshold};
  }
  const double t = mean / (sd / std::sqrt(n));
  const boost::math::students_t dist(n - 1.0);
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
  return {t, p, p < threshold};
}

}  // namespace mve
