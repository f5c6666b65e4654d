#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace hrp {

// Trunk D -> H -> H (rectifier), classification head H -> C, projection head H -> P.
struct Arch {
  int input = 2;
  int hidden = 64;
  int classes = 4;
  int proj = 16;

  // Offsets of each block inside the flat parameter vector, in declaration
  // order: W1 b1 W2 b2 Wc bc Wp bp. Matrices are row-major (out x in).
  std::size_t w1() const { return 0; }
  std::size_t b1() const { return w1() + static_cast<std::size_t>(hidden) * input; }
  std::size_t w2() const { return b1() + hidden; }
  std::size_t b2() const { return w2() + static_cast<std::size_t>(hidden) * hidden; }
  std::size_t wc() const { return b2() + hidden; }
  std::size_t bc() const { return wc() + static_cast<std::size_t>(classes) * hidden; }
  std::size_t wp() const { return bc() + classes; }
  std::size_t bp() const { return wp() + static_cast<std::size_t>(proj) * hidden; }
  std::size_t param_count() const { return bp() + proj; }

  bool valid() const { return input > 0 && hidden > 0 && classes >= 2 && proj > 0; }
  bool operator==(const Arch&) const = default;
};

struct GradientVector {
  std::vector<double> values;

  GradientVector() = default;
  explicit GradientVector(std::size_t n) : values(n, 0.0) {}

  std::size_t size() const { return values.size(); }
  GradientVector& operator+=(const GradientVector& o);
  GradientVector& operator-=(const GradientVector& o);
  GradientVector& operator*=(double s);
  double dot(const GradientVector& o) const;
  double norm() const;
};

GradientVector operator+(GradientVector a, const GradientVector& b);
GradientVector operator*(double s, GradientVector a);

struct ModelParams {
  Arch arch;
  std::vector<double> values;

  ModelParams() = default;
  explicit ModelParams(const Arch& a) : arch(a), values(a.param_count(), 0.0) {}

  // Returns params - step * direction.
  ModelParams moved(const GradientVector& direction, double step) const;
};

// Evaluation mode is accepted for interface parity; the network has no
// state that differs between modes.
enum class Mode { train, eval };

struct ForwardOutput {
  std::vector<double> logits;
  std::vector<double> embedding;
  // cached for backward
  std::vector<double> pre1, h1, pre2, h2;
};

ModelParams init_params(const Arch& arch, std::uint64_t seed);

// He-style fan-in scale used by init_params.
inline double init_scale(int fan_in) { return std::sqrt(2.0 / fan_in); }

ForwardOutput forward(const ModelParams& params, std::span<const double> x, Mode mode = Mode::train);

std::vector<double> softmax(std::span<const double> logits);
double log_sum_exp(std::span<const double> v);

// -sum_c target_c log softmax(logits)_c.
double ce_loss(std::span<const double> logits, std::span<const double> target);
// d ce_loss / d logits = sum(target) * softmax - target.
std::vector<double> ce_grad_logits(std::span<const double> logits, std::span<const double> target);

std::vector<double> one_hot(int cls, int num_classes);

// Accumulates into `grad` the parameter gradient of a scalar whose partials
// with respect to this sample's logits and embedding are `dlogits`, `demb`.
// An empty `demb` means zero.
void backward_into(const ModelParams& params, std::span<const double> x, const ForwardOutput& fwd,
                   std::span<const double> dlogits, std::span<const double> demb,
                   std::span<double> grad);

// Gradient of (1/|B|) sum_i weight_i * ce_loss(f(x_i), target_i).
GradientVector grad_batch(const ModelParams& params, std::span<const std::vector<double>> inputs,
                          std::span<const std::vector<double>> targets,
                          std::span<const double> weights);

struct LossEval {
  double value = 0.0;
  GradientVector grad;
};

// sum_i weight_i * ce_loss(f(x_i), target_i) / normalizer, with its gradient.
LossEval weighted_ce(const ModelParams& params, std::span<const std::vector<double>> inputs,
                     std::span<const std::vector<double>> targets, std::span<const double> weights,
                     double normalizer);

// Value of the grad_batch objective.
double loss_batch(const ModelParams& params, std::span<const std::vector<double>> inputs,
                  std::span<const std::vector<double>> targets, std::span<const double> weights);

struct PerSampleGrads {
  std::vector<GradientVector> given;   // grad of CE(f(x_i), y_i) / |B|
  std::vector<GradientVector> pseudo;  // grad of CE(f(x_i), pseudo_i) / |B|
};

PerSampleGrads per_sample_grads(const ModelParams& params, std::span<const std::vector<double>> inputs,
                                std::span<const std::vector<double>> given_targets,
                                std::span<const std::vector<double>> pseudo_targets);

struct Schedule {
  double base_lr = 0.05;
  std::vector<int> decay_epochs;
  double decay_factor = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;

  double lr_at(int epoch) const;
};

struct OptState {
  std::vector<double> velocity;
  std::uint64_t step = 0;
  Schedule schedule;

  static OptState fresh(const Arch& arch, const Schedule& schedule) {
    return {std::vector<double>(arch.param_count(), 0.0), 0, schedule};
  }
};

// v <- mu v + g + wd theta; theta <- theta - lr(epoch) v.
std::pair<ModelParams, OptState> sgd_step(const ModelParams& params, const GradientVector& grad,
                                          const OptState& state, int epoch);

struct Normalized {
  std::vector<double> unit;
  double norm = 0.0;
  bool degenerate = false;
};

// v / (|v| + 1e-12); the zero vector maps to itself and is flagged.
Normalized l2_normalize(std::span<const double> v);

// Pulls a gradient w.r.t. the normalized vector back onto the raw vector.
std::vector<double> l2_normalize_backward(std::span<const double> raw, std::span<const double> grad_unit);

constexpr double kNormalizeEps = 1e-12;

}  // namespace hrp
