#include "t2t/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "t2t/error.hpp"

namespace t2t {

GradCheckReport grad_check(const std::function<Tensor()>& f, std::span<Parameter> params,
                           const GradCheckOptions& options) {
  for (auto& p : params) p.value.zero_grad();
  {
    Tape tape;
    Tensor loss = f();
    tape.backward(loss);
  }

  GradCheckReport report;
  std::mt19937_64 rng(options.seed);
  for (auto& p : params) {
    const std::vector<double> analytic = p.value.grad();
    std::vector<std::size_t> coords(p.value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() >= options.full_sweep_limit) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(std::min(options.sample_size, coords.size()));
      std::sort(coords.begin(), coords.end());
    }
    auto values = p.value.mutable_data();
    for (std::size_t i : coords) {
      const double saved = values[i];
      values[i] = saved + options.step;
      const double up = f().item();
      values[i] = saved - options.step;
      const double down = f().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double err = std::abs(analytic[i] - numeric) /
                         std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
      ++report.coordinates_checked;
      if (report.worst_param.empty() || err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = p.name;
        report.worst_index = i;
        report.worst_analytic = analytic[i];
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace t2t
