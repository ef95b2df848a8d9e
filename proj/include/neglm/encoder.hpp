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

#pragma once

// Context encoders: a window log-bilinear encoder and a multi-layer LSTM,
// both batched over lanes (columns) and both with analytic truncated-BPTT
// gradients.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "neglm/params.hpp"
#include "neglm/rng.hpp"

namespace neglm::encoder {

using Matrix = Eigen::MatrixXd;

enum class EncoderKind { kWindow, kLstm };

std::string_view to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(std::string_view name);

/// Dropout placement used by the LSTM: on the layer-0 input, between
/// layers, and on the top-layer output. Recurrent connections are never
/// dropped.
inline constexpr std::string_view kDropoutPlacement = "input,between-layers,output";

struct EncoderSpec {
  EncoderKind kind = EncoderKind::kWindow;
  Eigen::Index input_dim = 32;
  Eigen::Index hidden_dim = 32;
  int layers = 1;       // lstm only
  int window_size = 1;  // window only
  double dropout = 0.0;
  /// Window encoder without the tanh. Used by tests that need an exact
  /// linear context.
  bool linear_window = false;

  /// Throws std::invalid_argument on bad dimensions.
  void validate() const;
  bool operator==(const EncoderSpec&) const = default;
};

class StaleTraceError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Window encoder: params "proj.weight" (hidden x input), "proj.bias".
/// LSTM layer l: "l<l>.wx" (4H x in), "l<l>.wh" (4H x H), "l<l>.b" (4H),
/// gate rows ordered input, forget, output, candidate.
ParamSet init_params(const EncoderSpec& spec, Rng& rng);

/// Carried across unroll windows; never reset between windows.
struct EncoderState {
  // lstm: per layer, hidden_dim x batch.
  std::vector<Matrix> h;
  std::vector<Matrix> c;
  // window: ring of the last window_size inputs, input_dim x batch.
  std::vector<Matrix> ring;
  std::vector<std::int64_t> ring_serial;  // -1 for the initial zero slots
  std::size_t ring_head = 0;
  std::int64_t serial = 0;

  Eigen::Index batch() const;
};

EncoderState initial_state(const EncoderSpec& spec, Eigen::Index batch);

enum class Phase { kTrain, kEval };

struct LayerCache {
  Matrix x;        // layer input after dropout
  Matrix in_mask;  // empty when no dropout was applied
  Matrix h_prev, c_prev;
  Matrix i, f, o, g;
  Matrix c, tanh_c;
};

struct StepCache {
  std::vector<LayerCache> layers;  // lstm
  Matrix mean;                     // window: averaged ring
  std::vector<std::int64_t> slot_serial;
  Matrix activation;               // window: output before dropout
  Matrix out_mask;
};

/// Activations of one unroll window, consumed by backward().
struct EncoderTrace {
  std::uint64_t params_version = 0;
  std::int64_t first_serial = 0;
  std::vector<StepCache> steps;
};

/// Starts a trace for a window whose first forward call sees `state`.
EncoderTrace begin_trace(const ParamSet& params, const EncoderState& state);

/// One time step for all lanes. `input` is input_dim x batch; returns the
/// hidden_dim x batch context. Dropout masks come from `dropout_rng` in the
/// training phase only. Throws std::invalid_argument on shape mismatch.
Matrix forward(const EncoderSpec& spec, const ParamSet& params, EncoderState& state,
               const Matrix& input, Phase phase, Rng* dropout_rng = nullptr,
               EncoderTrace* trace = nullptr);

struct EncoderGradients {
  ParamSet params;
  std::vector<Matrix> inputs;  // one input_dim x batch block per step
};

/// Gradients of sum_t <upstream[t], context_t> over the traced window.
/// Gradient does not flow into the state carried in from earlier windows.
/// Throws StaleTraceError if params changed since the trace was recorded.
EncoderGradients backward(const EncoderSpec& spec, const ParamSet& params,
                          const EncoderTrace& trace, std::span<const Matrix> upstream);

struct GradCheckReport {
  struct Block {
    std::string name;
    double max_relative_error;
  };
  std::vector<Block> blocks;  // parameter blocks, then "inputs"
  double worst = 0.0;
};

/// Guarded relative error |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor = 1e-4);

/// Central differences (h = 1e-5) against backward() on a random scalar
/// loss sum_t <r_t, context_t> over an unroll window. With dropout > 0 the
/// masks are replayed identically in every evaluation.
GradCheckReport grad_check(const EncoderSpec& spec, std::uint64_t seed, int unroll = 5,
                           Eigen::Index batch = 2);

}  // namespace neglm::encoder
