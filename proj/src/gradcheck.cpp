#include <algorithm>
#include <cmath>
#include <vector>

#include "tensor.hpp"

namespace ffinet {

template <typename S>
double grad_check(const std::function<Tensor<S>(Tape<S>*)>& fn, std::span<Tensor<S>> wrt,
                  double eps, long max_coords_per_tensor) {
  for (Tensor<S>& t : wrt) {
    if (!t.requires_grad()) t.set_requires_grad(true);
    t.zero_grad();
  }
  Tape<S> tape;
  Tensor<S> loss = fn(&tape);
  tape.backward(loss);
  std::vector<std::vector<S>> analytic;
  analytic.reserve(wrt.size());
  for (Tensor<S>& t : wrt) analytic.emplace_back(t.grad().begin(), t.grad().end());

  double max_rel = 0.0;
  for (size_t ti = 0; ti < wrt.size(); ++ti) {
    Tensor<S>& t = wrt[ti];
    auto vals = t.data();
    long n = t.numel();
    long stride = 1;
    if (max_coords_per_tensor > 0 && n > max_coords_per_tensor)
      stride = (n + max_coords_per_tensor - 1) / max_coords_per_tensor;
    for (long j = 0; j < n; j += stride) {
      S orig = vals[static_cast<size_t>(j)];
      vals[static_cast<size_t>(j)] = orig + static_cast<S>(eps);
      double fp = static_cast<double>(fn(nullptr).item());
      vals[static_cast<size_t>(j)] = orig - static_cast<S>(eps);
      double fm = static_cast<double>(fn(nullptr).item());
      vals[static_cast<size_t>(j)] = orig;
      double numeric = (fp - fm) / (2.0 * eps);
      double rel = std::abs(static_cast<double>(analytic[ti][static_cast<size_t>(j)]) - numeric) /
                   std::max(1.0, std::abs(numeric));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

template double grad_check<float>(const std::function<Tensor<float>(Tape<float>*)>&,
                                  std::span<Tensor<float>>, double, long);
template double grad_check<double>(const std::function<Tensor<double>(Tape<double>*)>&,
                                   std::span<Tensor<double>>, double, long);

}  // namespace ffinet
