#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "t2t/param.hpp"

namespace t2t {

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  std::size_t full_sweep_limit = 10000;  // parameters smaller than this are swept fully
  std::size_t sample_size = 256;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates_checked = 0;
  bool passed = true;
};

/// Compares tape gradients of the scalar `f` against central differences,
/// using |g_ad - g_fd| / max(1, |g_ad|, |g_fd|) per coordinate. `f` must be
/// deterministic.
GradCheckReport grad_check(const std::function<Tensor()>& f, std::span<Parameter> params,
                           const GradCheckOptions& options = {});

}  // namespace t2t
