#ifndef N2CE_GRADCHECK_HPP
#define N2CE_GRADCHECK_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "n2ce/common.hpp"

namespace n2ce {

struct GradCheckRow {
  std::string check;
  double error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct GradCheckOptions {
  Index dim = 2;
  Index samples = 64;
  std::vector<double> m_grid{1.0, 10.0, 1000.0};
  Index mlp_hidden_width = 16;
  Index mlp_resblocks = 2;
  Index mlp_coordinates = 100;
  std::uint64_t seed = 0;
};

/// Compares every analytic gradient against central differences of its own
/// objective, the sigmoid-form stage gradient against the direct form, and
/// M = 1 against plain NCE. Errors are relative (vector norm) except for
/// the last two, which are absolute.
std::vector<GradCheckRow> run_gradient_checks(const GradCheckOptions& options);

}  // namespace n2ce

#endif  // N2CE_GRADCHECK_HPP
