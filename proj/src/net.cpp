#include "hrp/net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hrp/errors.hpp"
#include "hrp/kernels.hpp"
#include "hrp/rng.hpp"

namespace hrp {

GradientVector& GradientVector::operator+=(const GradientVector& o) {
  if (o.size() != size()) throw ContractError("gradient size mismatch");
  for (std::size_t k = 0; k < values.size(); ++k) values[k] += o.values[k];
  return *this;
}

GradientVector& GradientVector::operator-=(const GradientVector& o) {
  if (o.size() != size()) throw ContractError("gradient size mismatch");
  for (std::size_t k = 0; k < values.size(); ++k) values[k] -= o.values[k];
  return *this;
}

GradientVector& GradientVector::operator*=(double s) {
  for (double& v : values) v *= s;
  return *this;
}

double GradientVector::dot(const GradientVector& o) const {
  if (o.size() != size()) throw ContractError("gradient size mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) acc += values[k] * o.values[k];
  return acc;
}

double GradientVector::norm() const { return std::sqrt(dot(*this)); }

GradientVector operator+(GradientVector a, const GradientVector& b) { return a += b; }
GradientVector operator*(double s, GradientVector a) { return a *= s; }

ModelParams ModelParams::moved(const GradientVector& direction, double step) const {
  if (direction.size() != values.size()) throw ContractError("direction size mismatch");
  ModelParams out = *this;
  for (std::size_t k = 0; k < values.size(); ++k) out.values[k] -= step * direction.values[k];
  return out;
}

ModelParams init_params(const Arch& arch, std::uint64_t seed) {
  if (!arch.valid()) throw ConfigError("invalid architecture");
  ModelParams p(arch);
  Rng rng(derive_seed(seed, 0x1a17));
  auto fill = [&](std::size_t offset, std::size_t count, int fan_in) {
    const double scale = init_scale(fan_in);
    for (std::size_t k = 0; k < count; ++k) p.values[offset + k] = scale * rng.normal();
  };
  const auto h = static_cast<std::size_t>(arch.hidden);
  fill(arch.w1(), h * arch.input, arch.input);
  fill(arch.w2(), h * h, arch.hidden);
  fill(arch.wc(), static_cast<std::size_t>(arch.classes) * h, arch.hidden);
  fill(arch.wp(), static_cast<std::size_t>(arch.proj) * h, arch.hidden);
  return p;
}

namespace {

// y = W x + b with W row-major (rows x cols).
void affine(const double* w, const double* b, std::span<const double> x, std::size_t rows,
            std::vector<double>& y) {
  const std::size_t cols = x.size();
  y.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = b[r];
    const double* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

void relu(const std::vector<double>& pre, std::vector<double>& out) {
  out.resize(pre.size());
  for (std::size_t k = 0; k < pre.size(); ++k) out[k] = pre[k] > 0.0 ? pre[k] : 0.0;
}

}  // namespace

ForwardOutput forward(const ModelParams& params, std::span<const double> x, Mode) {
  const Arch& a = params.arch;
  if (static_cast<int>(x.size()) != a.input)
    throw ContractError("forward: input has dimension " + std::to_string(x.size()) + ", expected " +
                        std::to_string(a.input));
  const double* p = params.values.data();
  ForwardOutput out;
  affine(p + a.w1(), p + a.b1(), x, a.hidden, out.pre1);
  relu(out.pre1, out.h1);
  affine(p + a.w2(), p + a.b2(), out.h1, a.hidden, out.pre2);
  relu(out.pre2, out.h2);
  affine(p + a.wc(), p + a.bc(), out.h2, a.classes, out.logits);
  affine(p + a.wp(), p + a.bp(), out.h2, a.proj, out.embedding);
  return out;
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

std::vector<double> softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  std::vector<double> p(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) p[c] = std::exp(logits[c] - lse);
  return p;
}

double ce_loss(std::span<const double> logits, std::span<const double> target) {
  if (logits.size() != target.size()) throw ContractError("ce_loss: size mismatch");
  const double lse = log_sum_exp(logits);
  double loss = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c)
    if (target[c] != 0.0) loss -= target[c] * (logits[c] - lse);
  return loss;
}

std::vector<double> ce_grad_logits(std::span<const double> logits, std::span<const double> target) {
  auto g = softmax(logits);
  const double mass = std::accumulate(target.begin(), target.end(), 0.0);
  for (std::size_t c = 0; c < g.size(); ++c) g[c] = mass * g[c] - target[c];
  return g;
}

std::vector<double> one_hot(int cls, int num_classes) {
  std::vector<double> v(num_classes, 0.0);
  v.at(cls) = 1.0;
  return v;
}

void backward_into(const ModelParams& params, std::span<const double> x, const ForwardOutput& fwd,
                   std::span<const double> dlogits, std::span<const double> demb,
                   std::span<double> grad) {
  const Arch& a = params.arch;
  const double* p = params.values.data();
  double* g = grad.data();
  const std::size_t H = a.hidden, C = a.classes, P = a.proj, D = a.input;

  std::vector<double> dh2(H, 0.0);
  if (!dlogits.empty()) {
    for (std::size_t c = 0; c < C; ++c) {
      const double d = dlogits[c];
      if (d == 0.0) continue;
      double* gw = g + a.wc() + c * H;
      const double* w = p + a.wc() + c * H;
      for (std::size_t h = 0; h < H; ++h) {
        gw[h] += d * fwd.h2[h];
        dh2[h] += w[h] * d;
      }
      g[a.bc() + c] += d;
    }
  }
  if (!demb.empty()) {
    for (std::size_t q = 0; q < P; ++q) {
      const double d = demb[q];
      if (d == 0.0) continue;
      double* gw = g + a.wp() + q * H;
      const double* w = p + a.wp() + q * H;
      for (std::size_t h = 0; h < H; ++h) {
        gw[h] += d * fwd.h2[h];
        dh2[h] += w[h] * d;
      }
      g[a.bp() + q] += d;
    }
  }

  std::vector<double> dh1(H, 0.0);
  for (std::size_t r = 0; r < H; ++r) {
    if (fwd.pre2[r] <= 0.0) continue;
    const double d = dh2[r];
    if (d == 0.0) continue;
    double* gw = g + a.w2() + r * H;
    const double* w = p + a.w2() + r * H;
    for (std::size_t h = 0; h < H; ++h) {
      gw[h] += d * fwd.h1[h];
      dh1[h] += w[h] * d;
    }
    g[a.b2() + r] += d;
  }

  for (std::size_t r = 0; r < H; ++r) {
    if (fwd.pre1[r] <= 0.0) continue;
    const double d = dh1[r];
    if (d == 0.0) continue;
    double* gw = g + a.w1() + r * D;
    for (std::size_t k = 0; k < D; ++k) gw[k] += d * x[k];
    g[a.b1() + r] += d;
  }
}

namespace {

void check_batch(std::size_t n, std::size_t targets, std::size_t weights) {
  if (targets != n || weights != n) throw ContractError("batch arguments have mismatched lengths");
}

}  // namespace

LossEval weighted_ce(const ModelParams& params, std::span<const std::vector<double>> inputs,
                     std::span<const std::vector<double>> targets, std::span<const double> weights,
                     double normalizer) {
  check_batch(inputs.size(), targets.size(), weights.size());
  LossEval out{0.0, GradientVector(params.values.size())};
  if (inputs.empty()) return out;
  const auto fwd = kernels::forward_batch(params, inputs);
  const double inv = 1.0 / normalizer;
  std::vector<kernels::BackwardItem> items(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    out.value += weights[i] * ce_loss(fwd[i].logits, targets[i]);
    items[i].x = inputs[i];
    items[i].fwd = &fwd[i];
    items[i].dlogits = ce_grad_logits(fwd[i].logits, targets[i]);
    for (double& d : items[i].dlogits) d *= weights[i] * inv;
  }
  out.value *= inv;
  out.grad = kernels::backward_sum(params, items);
  return out;
}

GradientVector grad_batch(const ModelParams& params, std::span<const std::vector<double>> inputs,
                          std::span<const std::vector<double>> targets,
                          std::span<const double> weights) {
  return weighted_ce(params, inputs, targets, weights, static_cast<double>(inputs.size())).grad;
}

double loss_batch(const ModelParams& params, std::span<const std::vector<double>> inputs,
                  std::span<const std::vector<double>> targets, std::span<const double> weights) {
  check_batch(inputs.size(), targets.size(), weights.size());
  if (inputs.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    acc += weights[i] * ce_loss(forward(params, inputs[i]).logits, targets[i]);
  return acc / static_cast<double>(inputs.size());
}

PerSampleGrads per_sample_grads(const ModelParams& params, std::span<const std::vector<double>> inputs,
                                std::span<const std::vector<double>> given_targets,
                                std::span<const std::vector<double>> pseudo_targets) {
  check_batch(inputs.size(), given_targets.size(), pseudo_targets.size());
  const auto fwd = kernels::forward_batch(params, inputs);
  const double inv = inputs.empty() ? 0.0 : 1.0 / static_cast<double>(inputs.size());
  std::vector<kernels::BackwardItem> given(inputs.size()), pseudo(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    given[i].x = pseudo[i].x = inputs[i];
    given[i].fwd = pseudo[i].fwd = &fwd[i];
    given[i].dlogits = ce_grad_logits(fwd[i].logits, given_targets[i]);
    pseudo[i].dlogits = ce_grad_logits(fwd[i].logits, pseudo_targets[i]);
    for (double& d : given[i].dlogits) d *= inv;
    for (double& d : pseudo[i].dlogits) d *= inv;
  }
  return {kernels::backward_each(params, given), kernels::backward_each(params, pseudo)};
}

double Schedule::lr_at(int epoch) const {
  double lr = base_lr;
  for (int e : decay_epochs)
    if (epoch >= e) lr *= decay_factor;
  return lr;
}

std::pair<ModelParams, OptState> sgd_step(const ModelParams& params, const GradientVector& grad,
                                          const OptState& state, int epoch) {
  const std::size_t n = params.values.size();
  if (grad.size() != n || state.velocity.size() != n) throw ContractError("sgd_step: shape mismatch");
  const Schedule& s = state.schedule;
  const double lr = s.lr_at(epoch);
  ModelParams next = params;
  OptState st = state;
  for (std::size_t k = 0; k < n; ++k) {
    st.velocity[k] = s.momentum * st.velocity[k] + grad.values[k] + s.weight_decay * params.values[k];
    next.values[k] -= lr * st.velocity[k];
  }
  ++st.step;
  return {std::move(next), std::move(st)};
}

Normalized l2_normalize(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double n = std::sqrt(sq);
  Normalized out;
  out.norm = n;
  out.unit.assign(v.size(), 0.0);
  if (n == 0.0) {
    out.degenerate = true;
    return out;
  }
  const double inv = 1.0 / (n + kNormalizeEps);
  for (std::size_t k = 0; k < v.size(); ++k) out.unit[k] = v[k] * inv;
  return out;
}

std::vector<double> l2_normalize_backward(std::span<const double> raw, std::span<const double> grad_unit) {
  double sq = 0.0, vg = 0.0;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    sq += raw[k] * raw[k];
    vg += raw[k] * grad_unit[k];
  }
  std::vector<double> out(raw.size(), 0.0);
  const double n = std::sqrt(sq);
  if (n == 0.0) return out;
  const double denom = n + kNormalizeEps;
  const double coef = vg / (n * denom * denom);
  for (std::size_t k = 0; k < raw.size(); ++k) out[k] = grad_unit[k] / denom - raw[k] * coef;
  return out;
}

}  // namespace hrp
