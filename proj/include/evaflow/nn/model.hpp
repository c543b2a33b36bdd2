#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evaflow/flow.hpp"
#include "evaflow/metrics.hpp"
#include "evaflow/nn/graph.hpp"
#include "evaflow/representation.hpp"

namespace evaflow::nn {

/// Architecture of the anytime flow network. Level 0 is the finest pyramid level
/// (stride 2); level `levels - 1` the coarsest (stride 2^levels).
struct ModelConfig {
  int bins = 15;
  int levels = 4;
  std::vector<int> channels{8, 16, 24, 32};
  std::vector<int> hidden{8, 16, 24, 32};
  int head_mid = 32;
  int height = 64;
  int width = 64;
  double leaky_slope = 0.1;
  /// Feed the previous step's coarsest-level flow as the coarsest prior instead of zero.
  bool temporal_flow_prior = false;

  int stride(int level) const { return 1 << (level + 1); }
};

void validate_config(const ModelConfig& config);
std::map<std::string, std::string> config_to_map(const ModelConfig& config);
ModelConfig config_from_map(const std::map<std::string, std::string>& values);

/// Named learnable tensors in a fixed order. One SMR set per level serves every time step.
template <typename T>
struct ModelParams {
  std::vector<std::pair<std::string, Tensor<T>>> tensors;

  Tensor<T>& get(const std::string& name);
  const Tensor<T>& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t parameter_count() const;

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    for (const auto& [name, t] : tensors) out.tensors.emplace_back(name, t.template cast<U>());
    return out;
  }
};

/// Shapes of every parameter for a config, in serialization order.
std::vector<std::pair<std::string, std::vector<int>>> parameter_layout(const ModelConfig& config);
/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights from `seed`; zero biases.
template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed);
/// Checks names and shapes against the layout of `config`.
template <typename T>
void check_params(const ModelConfig& config, const ModelParams<T>& params);

/// EVP1 parameter files (f32 payloads).
void save_params(const ModelParams<float>& params, const std::string& path);
ModelParams<float> load_params(const std::string& path);
std::vector<char> encode_params(const ModelParams<float>& params);

/// Graph handles for every parameter, bound once per graph so gradients from all
/// time steps accumulate in the same leaf.
using ParamVars = std::map<std::string, Var>;
template <typename T>
ParamVars bind_params(Graph<T>& g, const ModelParams<T>& params, bool trainable = true);

/// Encoder on a batch of single-channel bins (N,1,H,W); returns one tensor per level.
template <typename T>
std::vector<Var> encoder_forward(Graph<T>& g, const ModelConfig& config, const ParamVars& p, Var bins);

/// z = s(Wz*[h,x]), r = s(Wr*[h,x]), q = tanh(Wq*[r.h, x]), h' = (1-z).h + z.q
template <typename T>
Var convgru_cell(Graph<T>& g, const ParamVars& p, const std::string& prefix, Var h, Var x);

struct SmrOutput {
  Var flow;    // V^i_{0,j} at level resolution, level-pixel units
  Var hidden;  // h^i_j
};

/// One SMR module: warp features by the coarse flow, update the ConvGRU, add a residual.
/// `hidden_coarse` is undefined at the coarsest level.
template <typename T>
SmrOutput smr_step(Graph<T>& g, const ModelConfig& config, const ParamVars& p, int level, Var features,
                   Var flow_coarse, Var hidden_coarse, Var h_prev);

struct StackOutput {
  Var flow_full;               // (1,2,H,W) at input resolution, input-pixel units
  Var coarsest_flow;           // carried when temporal_flow_prior is on
  std::vector<Var> hidden;     // per level, finest first
};

/// Runs the SMR stack coarse to fine for one time step.
template <typename T>
StackOutput stack_step(Graph<T>& g, const ModelConfig& config, const ParamVars& p, const std::vector<Var>& pyramid,
                       const std::vector<Var>& h_prev, Var coarsest_prior);

/// Zero hidden states / coarsest prior for a fresh sequence.
template <typename T>
std::vector<Var> zero_hidden(Graph<T>& g, const ModelConfig& config);
template <typename T>
Var zero_coarsest_flow(Graph<T>& g, const ModelConfig& config);

/// Whole-window forward on a graph: encoder over all B bins at once, bin 0 primes
/// the hidden states, bins 1..B-1 each emit V_{0,j}. Returns B-1 full-resolution flows.
template <typename T>
std::vector<Var> forward_sequence(Graph<T>& g, const ModelConfig& config, const ParamVars& p, Var bins);

/// Detached per-level state carried between streaming steps.
template <typename T>
struct ModelState {
  std::vector<Tensor<T>> hidden;
  Tensor<T> coarsest_flow;
  std::optional<FlowField> last_flow;
  int step = -1;  // index of the last consumed bin
  double tau_s = 0.0;
  double t0_s = 0.0;

  bool initialized() const { return step >= 0; }
};

/// Consumes bin 0: encoder + one SMR pass whose flow is discarded.
template <typename T>
ModelState<T> model_init(const ModelConfig& config, const ModelParams<T>& params, std::span<const float> bin0,
                         double tau_s, double t0_s = 0.0);
/// Consumes the next bin and returns V_{0,j} with duration j * tau.
template <typename T>
FlowField model_step(ModelState<T>& state, const ModelConfig& config, const ModelParams<T>& params,
                     std::span<const float> bin);

/// Batch inference on a UVG grid; returns the B-1 time-dense flows.
template <typename T>
FlowSequence model_forward(const Grid& grid, const ModelConfig& config, const ModelParams<T>& params);

/// Converts a (1,2,H,W) tensor into a FlowField with the given duration.
template <typename T>
FlowField tensor_to_flow(const Tensor<T>& t, double duration_s);
/// Packs a grid's bins into a (B,1,H,W) tensor.
template <typename T>
Tensor<T> grid_to_tensor(const Grid& grid);

}  // namespace evaflow::nn
