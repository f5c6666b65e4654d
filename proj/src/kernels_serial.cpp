#include "hrp/kernels.hpp"

namespace hrp::kernels::serial {

std::vector<ForwardOutput> forward_batch(const ModelParams& params,
                                         std::span<const std::vector<double>> inputs) {
  std::vector<ForwardOutput> out;
  out.reserve(inputs.size());
  for (const auto& x : inputs) out.push_back(forward(params, x));
  return out;
}

std::vector<GradientVector> backward_each(const ModelParams& params, std::span<const BackwardItem> items) {
  std::vector<GradientVector> out;
  out.reserve(items.size());
  for (const auto& it : items) {
    GradientVector g(params.values.size());
    backward_into(params, it.x, *it.fwd, it.dlogits, it.demb, g.values);
    out.push_back(std::move(g));
  }
  return out;
}

GradientVector backward_sum(const ModelParams& params, std::span<const BackwardItem> items) {
  GradientVector total(params.values.size());
  GradientVector scratch(params.values.size());
  for (const auto& it : items) {
    std::fill(scratch.values.begin(), scratch.values.end(), 0.0);
    backward_into(params, it.x, *it.fwd, it.dlogits, it.demb, scratch.values);
    total += scratch;
  }
  return total;
}

std::vector<double> gram(std::span<const std::vector<double>> rows) {
  const std::size_t n = rows.size();
  std::vector<double> s(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t d = 0; d < rows[i].size(); ++d) acc += rows[i][d] * rows[j][d];
      s[i * n + j] = acc;
    }
  return s;
}

std::vector<double> dots(const GradientVector& g, std::span<const GradientVector> others) {
  std::vector<double> out;
  out.reserve(others.size());
  for (const auto& o : others) out.push_back(g.dot(o));
  return out;
}

}  // namespace hrp::kernels::serial
