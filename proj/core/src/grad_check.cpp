#include "coupon/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace coupon::nn {

GradCheckReport grad_check(ParamStore& params, const ForwardBackwardFn& fn,
                           GradCheckOptions options) {
  GradCheckReport report;
  report.tolerance = options.tolerance;

  Gradients analytic = Gradients::zeros_like(params);
  (void)fn(params, &analytic);

  const double h = options.step;
  for (const auto& name : params.names()) {
    Matrix& value = params.get(name);
    const Matrix& grad = analytic.get(name);
    ParamCheck check;
    check.name = name;
    auto cells = value.values();
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const double saved = cells[i];
      cells[i] = saved + h;
      const double loss_plus = fn(params, nullptr);
      cells[i] = saved - h;
      const double loss_minus = fn(params, nullptr);
      cells[i] = saved;
      if (!std::isfinite(loss_plus) || !std::isfinite(loss_minus)) {
        report.failure = "non-finite loss while perturbing " + name +
                         " at index " + std::to_string(i);
        report.passed = false;
        report.worst_param = name;
        report.worst_error = std::numeric_limits<double>::infinity();
        return report;
      }
      const double fd = (loss_plus - loss_minus) / (2.0 * h);
      const double a = grad.values()[i];
      const double rel =
          std::fabs(a - fd) / std::max({std::fabs(a), std::fabs(fd), 1e-8});
      if (rel > check.max_rel_error) {
        check.max_rel_error = rel;
        check.worst_index = i;
      }
    }
    if (check.max_rel_error > report.worst_error) {
      report.worst_error = check.max_rel_error;
      report.worst_param = name;
    }
    report.params.push_back(std::move(check));
  }

  report.passed = report.worst_error <= options.tolerance;
  return report;
}

}  // namespace coupon::nn
