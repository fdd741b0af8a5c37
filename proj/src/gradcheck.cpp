#include "scvae/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace scvae {

GradCheckResult finite_diff_check(const std::function<Tensor(const Tensor&)>& f,
                                  const Tensor& point, double step, double eps) {
  Tensor p = Tensor::leaf(point.shape(), point.values(), /*requires_grad=*/true);
  Tensor loss = f(p);
  if (loss.size() != 1)
    throw std::invalid_argument("finite_diff_check: f must return a scalar");
  backward(loss);
  const std::vector<double> analytic = p.grad();

  GradCheckResult res;
  std::vector<double> probe = point.values();
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double x0 = probe[i];
    probe[i] = x0 + step;
    const double fp = f(Tensor::leaf(point.shape(), probe)).item();
    probe[i] = x0 - step;
    const double fm = f(Tensor::leaf(point.shape(), probe)).item();
    probe[i] = x0;
    const double central = (fp - fm) / (2.0 * step);
    const double a = analytic[i];
    if (std::abs(a) < 1e-12 && std::abs(central) < 1e-12) {
      ++res.coordinates_skipped;
      continue;
    }
    const double rel = std::abs(a - central) / (std::abs(a) + std::abs(central) + eps);
    res.max_rel_error = std::max(res.max_rel_error, rel);
    ++res.coordinates_checked;
  }
  return res;
}

}  // namespace scvae
