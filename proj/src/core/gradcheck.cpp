#include "crat/core/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace crat {

GradCheckReport finite_diff_check(const std::function<double(const ParamStore&)>& loss,
                                  const std::function<std::vector<Array2>(const ParamStore&)>& gradient,
                                  ParamStore params, double h, double tol, const GradCheckOptions& options) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw std::invalid_argument("finite_diff_check: step outside [1e-7, 1e-3]");
  const std::vector<Array2> analytic = gradient(params);
  std::mt19937_64 rng(options.seed);

  GradCheckReport report;
  auto& items = params.items();
  for (std::size_t p = 0; p < items.size(); ++p) {
    if (!items[p].trainable) continue;
    const std::size_t n = items[p].value.size();
    std::vector<std::size_t> entries(n);
    std::iota(entries.begin(), entries.end(), 0);
    if (options.max_entries_per_param > 0 && n > options.max_entries_per_param) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(options.max_entries_per_param);
      std::sort(entries.begin(), entries.end());
    }
    GradCheckEntry worst{items[p].name, 0, 0.0, 0.0, -1.0};
    for (std::size_t j : entries) {
      double& w = items[p].value.data[j];
      const double saved = w;
      w = saved + h;
      const double up = loss(params);
      w = saved - h;
      const double down = loss(params);
      w = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[p].empty() ? 0.0 : analytic[p].data[j];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.magnitude_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > worst.rel_error) worst = GradCheckEntry{items[p].name, j, a, numeric, rel};
    }
    if (worst.rel_error < 0) continue;
    report.per_param.push_back(worst);
    if (worst.rel_error >= report.max_rel_error) {
      report.max_rel_error = worst.rel_error;
      report.worst = worst;
    }
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

}  // namespace crat
