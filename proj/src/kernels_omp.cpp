#include "hrp/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hrp::kernels {

bool openmp_enabled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace parallel {

std::vector<ForwardOutput> forward_batch(const ModelParams& params,
                                         std::span<const std::vector<double>> inputs) {
  const auto n = static_cast<std::ptrdiff_t>(inputs.size());
  std::vector<ForwardOutput> out(inputs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = forward(params, inputs[i]);
  return out;
}

std::vector<GradientVector> backward_each(const ModelParams& params, std::span<const BackwardItem> items) {
  const auto n = static_cast<std::ptrdiff_t>(items.size());
  std::vector<GradientVector> out(items.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    GradientVector g(params.values.size());
    backward_into(params, items[i].x, *items[i].fwd, items[i].dlogits, items[i].demb, g.values);
    out[i] = std::move(g);
  }
  return out;
}

GradientVector backward_sum(const ModelParams& params, std::span<const BackwardItem> items) {
  if (max_threads() == 1) return serial::backward_sum(params, items);
  const auto each = backward_each(params, items);
  const std::size_t dim = params.values.size();
  constexpr std::size_t kBlock = 512;
  const auto blocks = static_cast<std::ptrdiff_t>((dim + kBlock - 1) / kBlock);
  GradientVector total(dim);
  // coordinate blocks in parallel, samples in order: same additions as the serial loop
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < blocks; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kBlock, hi = std::min(dim, lo + kBlock);
    double* dst = total.values.data();
    for (const auto& g : each)
      for (std::size_t k = lo; k < hi; ++k) dst[k] += g.values[k];
  }
  return total;
}

std::vector<double> gram(std::span<const std::vector<double>> rows) {
  const auto n = static_cast<std::ptrdiff_t>(rows.size());
  std::vector<double> s(rows.size() * rows.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    for (std::ptrdiff_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t d = 0; d < rows[i].size(); ++d) acc += rows[i][d] * rows[j][d];
      s[i * n + j] = acc;
    }
  return s;
}

std::vector<double> dots(const GradientVector& g, std::span<const GradientVector> others) {
  const auto n = static_cast<std::ptrdiff_t>(others.size());
  std::vector<double> out(others.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = g.dot(others[i]);
  return out;
}

}  // namespace parallel
}  // namespace hrp::kernels
