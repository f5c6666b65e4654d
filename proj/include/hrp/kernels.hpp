#pragma once

// Batch kernels with two interchangeable back ends: `serial` is the
// reference, `parallel` splits work across OpenMP threads. Both produce
// bit-identical results: per-sample work is independent and every reduction
// runs in sample order.

#include <span>
#include <vector>

#include "hrp/net.hpp"

namespace hrp::kernels {

struct BackwardItem {
  std::span<const double> x;
  const ForwardOutput* fwd = nullptr;
  std::vector<double> dlogits;  // empty = zero
  std::vector<double> demb;     // empty = zero
};

namespace serial {
std::vector<ForwardOutput> forward_batch(const ModelParams& params,
                                         std::span<const std::vector<double>> inputs);
GradientVector backward_sum(const ModelParams& params, std::span<const BackwardItem> items);
std::vector<GradientVector> backward_each(const ModelParams& params, std::span<const BackwardItem> items);
// Row-major n x n matrix of pairwise dot products.
std::vector<double> gram(std::span<const std::vector<double>> rows);
std::vector<double> dots(const GradientVector& g, std::span<const GradientVector> others);
}  // namespace serial

namespace parallel {
std::vector<ForwardOutput> forward_batch(const ModelParams& params,
                                         std::span<const std::vector<double>> inputs);
GradientVector backward_sum(const ModelParams& params, std::span<const BackwardItem> items);
std::vector<GradientVector> backward_each(const ModelParams& params, std::span<const BackwardItem> items);
std::vector<double> gram(std::span<const std::vector<double>> rows);
std::vector<double> dots(const GradientVector& g, std::span<const GradientVector> others);
}  // namespace parallel

// True when the parallel back end was built with OpenMP.
bool openmp_enabled();
int max_threads();

// Default back end used by the rest of the library.
using namespace parallel;

}  // namespace hrp::kernels
