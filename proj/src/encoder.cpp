// Copyright 2026 The neglm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "neglm/encoder.hpp"

#include <algorithm>
#include <cmath>

namespace neglm::encoder {
namespace {

constexpr double kInitScale = 0.05;

Matrix sigmoid(const Matrix& z) {
  return z.unaryExpr([](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

Matrix tanh(const Matrix& z) {
  return z.array().tanh().matrix();
}

// Inverted dropout: kept units are scaled by 1 / (1 - p).
Matrix draw_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Matrix mask(rows, cols);
  const double scale = 1.0 / (1.0 - p);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) mask(i, j) = rng.uniform() < p ? 0.0 : scale;
  return mask;
}

std::string block(int layer, const char* what) {
  return "l" + std::to_string(layer) + "." + what;
}

void fill_uniform(Matrix& m, double scale, Rng& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-scale, scale);
}

}  // namespace

std::string_view to_string(EncoderKind kind) {
  return kind == EncoderKind::kWindow ? "window" : "lstm";
}

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "window") return EncoderKind::kWindow;
  if (name == "lstm") return EncoderKind::kLstm;
  throw std::invalid_argument("unknown encoder: " + std::string(name));
}

void EncoderSpec::validate() const {
  if (input_dim < 1 || hidden_dim < 1)
    throw std::invalid_argument("encoder dimensions must be >= 1");
  if (kind == EncoderKind::kLstm && layers < 1)
    throw std::invalid_argument("lstm needs at least one layer");
  if (kind == EncoderKind::kWindow && window_size < 1)
    throw std::invalid_argument("window size must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw std::invalid_argument("dropout must lie in [0, 1)");
}

ParamSet init_params(const EncoderSpec& spec, Rng& rng) {
  spec.validate();
  ParamSet params;
  if (spec.kind == EncoderKind::kWindow) {
    fill_uniform(params[params.add("proj.weight", spec.hidden_dim, spec.input_dim)],
                 kInitScale, rng);
    fill_uniform(params[params.add("proj.bias", spec.hidden_dim, 1)], kInitScale, rng);
    return params;
  }
  const Eigen::Index h = spec.hidden_dim;
  for (int l = 0; l < spec.layers; ++l) {
    const Eigen::Index in = l == 0 ? spec.input_dim : h;
    fill_uniform(params[params.add(block(l, "wx"), 4 * h, in)], kInitScale, rng);
    fill_uniform(params[params.add(block(l, "wh"), 4 * h, h)], kInitScale, rng);
    Matrix& b = params[params.add(block(l, "b"), 4 * h, 1)];
    fill_uniform(b, kInitScale, rng);
    b.middleRows(h, h).setConstant(1.0);
  }
  return params;
}

Eigen::Index EncoderState::batch() const {
  if (!h.empty()) return h.front().cols();
  if (!ring.empty()) return ring.front().cols();
  return 0;
}

EncoderState initial_state(const EncoderSpec& spec, Eigen::Index batch) {
  spec.validate();
  EncoderState state;
  if (spec.kind == EncoderKind::kWindow) {
    state.ring.assign(static_cast<std::size_t>(spec.window_size),
                      Matrix::Zero(spec.input_dim, batch));
    state.ring_serial.assign(static_cast<std::size_t>(spec.window_size), -1);
  } else {
    state.h.assign(static_cast<std::size_t>(spec.layers), Matrix::Zero(spec.hidden_dim, batch));
    state.c = state.h;
  }
  return state;
}

EncoderTrace begin_trace(const ParamSet& params, const EncoderState& state) {
  EncoderTrace trace;
  trace.params_version = params.version();
  trace.first_serial = state.serial;
  return trace;
}

Matrix forward(const EncoderSpec& spec, const ParamSet& params, EncoderState& state,
               const Matrix& input, Phase phase, Rng* dropout_rng, EncoderTrace* trace) {
  if (input.rows() != spec.input_dim || input.cols() != state.batch())
    throw std::invalid_argument("encoder input has shape " + std::to_string(input.rows()) +
                                "x" + std::to_string(input.cols()) + ", expected " +
                                std::to_string(spec.input_dim) + "x" +
                                std::to_string(state.batch()));
  const bool drop = phase == Phase::kTrain && spec.dropout > 0.0;
  if (drop && dropout_rng == nullptr)
    throw std::invalid_argument("training-phase dropout needs a generator");
  const Eigen::Index batch = input.cols();
  StepCache cache;

  Matrix out;
  if (spec.kind == EncoderKind::kWindow) {
    const auto ws = static_cast<std::size_t>(spec.window_size);
    state.ring[state.ring_head] = input;
    state.ring_serial[state.ring_head] = state.serial;
    state.ring_head = (state.ring_head + 1) % ws;
    Matrix mean = Matrix::Zero(spec.input_dim, batch);
    for (const Matrix& slot : state.ring) mean += slot;
    mean /= static_cast<double>(ws);
    const Matrix& w = params[0];
    const Matrix& b = params[1];
    Matrix pre = w * mean;
    pre.colwise() += b.col(0);
    Matrix act = spec.linear_window ? pre : tanh(pre);
    if (drop) {
      cache.out_mask = draw_mask(act.rows(), act.cols(), spec.dropout, *dropout_rng);
      out = act.cwiseProduct(cache.out_mask);
    } else {
      out = act;
    }
    if (trace) {
      cache.mean = std::move(mean);
      cache.slot_serial = state.ring_serial;
      cache.activation = std::move(act);
    }
  } else {
    const Eigen::Index h = spec.hidden_dim;
    Matrix x = input;
    for (int l = 0; l < spec.layers; ++l) {
      LayerCache lc;
      if (drop) {
        lc.in_mask = draw_mask(x.rows(), x.cols(), spec.dropout, *dropout_rng);
        x = x.cwiseProduct(lc.in_mask);
      }
      const std::size_t base = static_cast<std::size_t>(3 * l);
      Matrix gates = params[base] * x + params[base + 1] * state.h[l];
      gates.colwise() += params[base + 2].col(0);
      Matrix i = sigmoid(gates.topRows(h));
      Matrix f = sigmoid(gates.middleRows(h, h));
      Matrix o = sigmoid(gates.middleRows(2 * h, h));
      Matrix g = tanh(gates.bottomRows(h));
      Matrix c = f.cwiseProduct(state.c[l]) + i.cwiseProduct(g);
      Matrix tanh_c = tanh(c);
      Matrix h_new = o.cwiseProduct(tanh_c);
      if (trace) {
        lc.x = x;
        lc.h_prev = state.h[l];
        lc.c_prev = state.c[l];
        lc.i = std::move(i);
        lc.f = std::move(f);
        lc.o = std::move(o);
        lc.g = std::move(g);
        lc.c = c;
        lc.tanh_c = std::move(tanh_c);
        cache.layers.push_back(std::move(lc));
      }
      state.c[l] = std::move(c);
      state.h[l] = h_new;
      x = std::move(h_new);
    }
    if (drop) {
      cache.out_mask = draw_mask(x.rows(), x.cols(), spec.dropout, *dropout_rng);
      out = x.cwiseProduct(cache.out_mask);
    } else {
      out = std::move(x);
    }
  }
  ++state.serial;
  if (trace) trace->steps.push_back(std::move(cache));
  return out;
}

EncoderGradients backward(const EncoderSpec& spec, const ParamSet& params,
                          const EncoderTrace& trace, std::span<const Matrix> upstream) {
  if (trace.params_version != params.version())
    throw StaleTraceError("encoder trace was recorded against older parameters");
  if (upstream.size() != trace.steps.size())
    throw std::invalid_argument("upstream gradient count does not match the trace");
  const std::size_t steps = trace.steps.size();
  EncoderGradients grads;
  grads.params = params.zeros_like();
  grads.inputs.resize(steps);
  if (steps == 0) return grads;
  const Eigen::Index batch = upstream[0].cols();
  for (auto& g : grads.inputs) g = Matrix::Zero(spec.input_dim, batch);

  if (spec.kind == EncoderKind::kWindow) {
    const Matrix& w = params[0];
    const double inv_ws = 1.0 / static_cast<double>(spec.window_size);
    for (std::size_t t = 0; t < steps; ++t) {
      const StepCache& cache = trace.steps[t];
      Matrix d_act = cache.out_mask.size() ? upstream[t].cwiseProduct(cache.out_mask)
                                           : upstream[t];
      Matrix d_pre = spec.linear_window
                         ? d_act
                         : Matrix(d_act.array() * (1.0 - cache.activation.array().square()));
      grads.params[0].noalias() += d_pre * cache.mean.transpose();
      grads.params[1] += d_pre.rowwise().sum();
      const Matrix d_mean = (w.transpose() * d_pre) * inv_ws;
      for (std::int64_t serial : cache.slot_serial) {
        const std::int64_t step = serial - trace.first_serial;
        if (serial >= 0 && step >= 0) grads.inputs[static_cast<std::size_t>(step)] += d_mean;
      }
    }
    return grads;
  }

  const Eigen::Index h = spec.hidden_dim;
  const auto layers = static_cast<std::size_t>(spec.layers);
  std::vector<Matrix> dh_next(layers, Matrix::Zero(h, batch));
  std::vector<Matrix> dc_next(layers, Matrix::Zero(h, batch));
  Matrix d_gates(4 * h, batch);
  for (std::size_t t = steps; t-- > 0;) {
    const StepCache& cache = trace.steps[t];
    Matrix d_above = cache.out_mask.size() ? upstream[t].cwiseProduct(cache.out_mask)
                                           : upstream[t];
    for (std::size_t l = layers; l-- > 0;) {
      const LayerCache& lc = cache.layers[l];
      const Matrix dh = d_above + dh_next[l];
      const auto d_o = dh.array() * lc.tanh_c.array();
      const Matrix dc = (dh.array() * lc.o.array() * (1.0 - lc.tanh_c.array().square())).matrix() +
                        dc_next[l];
      const auto d_i = dc.array() * lc.g.array();
      const auto d_g = dc.array() * lc.i.array();
      const auto d_f = dc.array() * lc.c_prev.array();
      d_gates.topRows(h) = (d_i * lc.i.array() * (1.0 - lc.i.array())).matrix();
      d_gates.middleRows(h, h) = (d_f * lc.f.array() * (1.0 - lc.f.array())).matrix();
      d_gates.middleRows(2 * h, h) = (d_o * lc.o.array() * (1.0 - lc.o.array())).matrix();
      d_gates.bottomRows(h) = (d_g * (1.0 - lc.g.array().square())).matrix();

      const std::size_t base = 3 * l;
      grads.params[base].noalias() += d_gates * lc.x.transpose();
      grads.params[base + 1].noalias() += d_gates * lc.h_prev.transpose();
      grads.params[base + 2] += d_gates.rowwise().sum();
      dh_next[l].noalias() = params[base + 1].transpose() * d_gates;
      dc_next[l] = dc.cwiseProduct(lc.f);
      Matrix dx = params[base].transpose() * d_gates;
      if (lc.in_mask.size()) dx = dx.cwiseProduct(lc.in_mask);
      d_above = std::move(dx);
    }
    grads.inputs[t] = std::move(d_above);
  }
  return grads;
}

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradCheckReport grad_check(const EncoderSpec& spec, std::uint64_t seed, int unroll,
                           Eigen::Index batch) {
  spec.validate();
  Rng rng(seed);
  ParamSet params = init_params(spec, rng);
  // Larger weights than the default init so gates leave their linear range.
  for (std::size_t b = 0; b < params.size(); ++b)
    for (Eigen::Index i = 0; i < params[b].size(); ++i) params[b](i) = rng.uniform(-0.5, 0.5);

  std::vector<Matrix> inputs(static_cast<std::size_t>(unroll));
  std::vector<Matrix> weights(static_cast<std::size_t>(unroll));
  for (auto& x : inputs) {
    x.resize(spec.input_dim, batch);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.uniform(-1.0, 1.0);
  }
  for (auto& r : weights) {
    r.resize(spec.hidden_dim, batch);
    for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = rng.uniform(-1.0, 1.0);
  }

  // A warm-up window leaves a nonzero carried state; it stays fixed so the
  // numeric gradient also stops at the window boundary.
  EncoderState carried = initial_state(spec, batch);
  Rng warm_rng = rng.split(7);
  for (int t = 0; t < 3; ++t) {
    Matrix x(spec.input_dim, batch);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.uniform(-1.0, 1.0);
    forward(spec, params, carried, x, Phase::kTrain, &warm_rng);
  }
  const std::uint64_t mask_seed = rng.next_u64();

  auto loss = [&](const ParamSet& p, const std::vector<Matrix>& xs, EncoderTrace* trace) {
    EncoderState state = carried;
    Rng mask_rng(mask_seed);
    double total = 0.0;
    for (std::size_t t = 0; t < xs.size(); ++t) {
      const Matrix ctx = forward(spec, p, state, xs[t], Phase::kTrain, &mask_rng, trace);
      total += ctx.cwiseProduct(weights[t]).sum();
    }
    return total;
  };

  EncoderTrace trace = begin_trace(params, carried);
  loss(params, inputs, &trace);
  const EncoderGradients grads = backward(spec, params, trace, weights);

  constexpr double kStep = 1e-5;
  GradCheckReport report;
  for (std::size_t b = 0; b < params.size(); ++b) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < params[b].size(); ++i) {
      const double saved = params[b](i);
      params[b](i) = saved + kStep;
      const double up = loss(params, inputs, nullptr);
      params[b](i) = saved - kStep;
      const double down = loss(params, inputs, nullptr);
      params[b](i) = saved;
      worst = std::max(worst, relative_error(grads.params[b](i), (up - down) / (2 * kStep)));
    }
    report.blocks.push_back({params.name(b), worst});
  }
  double worst_input = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    for (Eigen::Index i = 0; i < inputs[t].size(); ++i) {
      const double saved = inputs[t](i);
      inputs[t](i) = saved + kStep;
      const double up = loss(params, inputs, nullptr);
      inputs[t](i) = saved - kStep;
      const double down = loss(params, inputs, nullptr);
      inputs[t](i) = saved;
      worst_input =
          std::max(worst_input, relative_error(grads.inputs[t](i), (up - down) / (2 * kStep)));
    }
  }
  report.blocks.push_back({"inputs", worst_input});
  for (const auto& b : report.blocks) report.worst = std::max(report.worst, b.max_relative_error);
  return report;
}

}  // namespace neglm::encoder
