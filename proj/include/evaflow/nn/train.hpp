#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "evaflow/flow.hpp"
#include "evaflow/nn/model.hpp"
#include "evaflow/representation.hpp"

namespace evaflow::nn {

struct TrainConfig {
  int iterations = 500;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global gradient-norm clip; 0 disables.
  double grad_clip = 0.0;
  bool augment_flip = false;
  /// Random crop to the model geometry when samples are larger than it.
  bool augment_crop = false;
  std::uint64_t seed = 0;
};

std::map<std::string, std::string> train_config_to_map(const TrainConfig& config);
TrainConfig train_config_from_map(const std::map<std::string, std::string>& values);

/// One supervised window: the UVG of the window and the flow over the whole window.
struct TrainSample {
  Grid grid;
  FlowField gt;
};

struct TrainResult {
  ModelParams<float> params;
  std::vector<double> losses;
};

/// Called after every iteration with (iteration, loss).
using TrainCallback = std::function<void(int, double)>;

/// L1 loss on the final output V_{0,B-1} and its gradient for every parameter.
template <typename T>
double loss_and_gradients(const ModelConfig& model, const ModelParams<T>& params, const TrainSample& sample,
                          ModelParams<T>* gradients);

/// Adam on batch-1 samples visited in a seeded shuffled order.
TrainResult train_toy(const ModelConfig& model, const TrainConfig& train, const std::vector<TrainSample>& dataset,
                      const TrainCallback& callback = {});
/// Continues from existing parameters.
TrainResult train_toy(const ModelConfig& model, const TrainConfig& train, const std::vector<TrainSample>& dataset,
                      ModelParams<float> initial, const TrainCallback& callback = {});

/// Horizontal mirror of a sample (x -> W-1-x, u -> -u).
TrainSample flip_horizontal(const TrainSample& sample);
/// Window [y0, y0+h) x [x0, x0+w) of a sample.
TrainSample crop(const TrainSample& sample, int y0, int x0, int height, int width);

/// Mean EPE of the final output over a dataset.
double final_flow_epe(const ModelConfig& model, const ModelParams<float>& params,
                      const std::vector<TrainSample>& dataset);

/// Loads every sample_*.evt1 with its sample_*.evaf from a directory (sorted by name).
std::vector<TrainSample> load_training_set(const std::string& dir, int bins);

}  // namespace evaflow::nn
