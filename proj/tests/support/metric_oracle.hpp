#pragma once

#include <cmath>
#include <vector>

#include "crat/core/array2.hpp"

// Naive nested-loop metric twins. They share the distance primitive (hypot)
// and summation order with production so agreement can be asserted exactly.
namespace crat::testing {

struct OracleMetrics {
  double ade = 0, fde = 0, mr = 0;
};

inline OracleMetrics oracle_metrics(const std::vector<std::vector<Array2>>& preds, const std::vector<Array2>& gts,
                                    std::size_t k) {
  OracleMetrics out;
  double misses = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double best_ade = 1e300, best_fde = 1e300;
    for (std::size_t m = 0; m < k; ++m) {
      double total = 0;
      for (std::size_t t = 0; t < gts[i].rows; ++t) {
        total += std::hypot(preds[i][m](t, 0) - gts[i](t, 0), preds[i][m](t, 1) - gts[i](t, 1));
      }
      const double ade = total / double(gts[i].rows);
      if (ade < best_ade) best_ade = ade;
      const std::size_t e = gts[i].rows - 1;
      const double fde = std::hypot(preds[i][m](e, 0) - gts[i](e, 0), preds[i][m](e, 1) - gts[i](e, 1));
      if (fde < best_fde) best_fde = fde;
    }
    out.ade += best_ade;
    out.fde += best_fde;
    bool hit = false;
    for (std::size_t m = 0; m < k; ++m) {
      const std::size_t e = gts[i].rows - 1;
      if (std::hypot(preds[i][m](e, 0) - gts[i](e, 0), preds[i][m](e, 1) - gts[i](e, 1)) < 2.0) hit = true;
    }
    if (!hit) misses += 1;
  }
  const double n = double(preds.size());
  out.ade /= n;
  out.fde /= n;
  out.mr = misses / n;
  return out;
}

}  // namespace crat::testing
