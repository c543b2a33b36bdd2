#include "evaflow/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <sstream>

#include "evaflow/error.hpp"
#include "evaflow/events.hpp"
#include "evaflow/metrics.hpp"
#include "evaflow/nn/ops.hpp"

namespace evaflow::nn {

namespace {

std::string number(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

void check_sample(const ModelConfig& model, const TrainSample& s) {
  if (s.grid.kind != GridKind::kUnifiedVoxelGrid) throw shape_error("training samples must be unified voxel grids");
  if (s.grid.bins() != model.bins) throw shape_error("sample has " + std::to_string(s.grid.bins()) + " bins, model expects " + std::to_string(model.bins));
  if (s.gt.height != s.grid.height() || s.gt.width != s.grid.width())
    throw shape_error("ground-truth flow geometry differs from its grid");
}

template <typename T>
Tensor<T> flow_tensor(const FlowField& f) {
  Tensor<T> t({1, 2, f.height, f.width});
  const std::size_t plane = f.size();
  for (std::size_t i = 0; i < plane; ++i) {
    t[i] = static_cast<T>(f.u[i]);
    t[plane + i] = static_cast<T>(f.v[i]);
  }
  return t;
}

}  // namespace

std::map<std::string, std::string> train_config_to_map(const TrainConfig& c) {
  return {{"iterations", std::to_string(c.iterations)},
          {"learning_rate", number(c.learning_rate)},
          {"beta1", number(c.beta1)},
          {"beta2", number(c.beta2)},
          {"epsilon", number(c.epsilon)},
          {"grad_clip", number(c.grad_clip)},
          {"augment_flip", c.augment_flip ? "1" : "0"},
          {"augment_crop", c.augment_crop ? "1" : "0"},
          {"seed", std::to_string(c.seed)}};
}

TrainConfig train_config_from_map(const std::map<std::string, std::string>& values) {
  TrainConfig c;
  auto get = [&](const char* key) -> const std::string* {
    const auto it = values.find(key);
    return it == values.end() ? nullptr : &it->second;
  };
  try {
    if (auto v = get("iterations")) c.iterations = std::stoi(*v);
    if (auto v = get("learning_rate")) c.learning_rate = std::stod(*v);
    if (auto v = get("beta1")) c.beta1 = std::stod(*v);
    if (auto v = get("beta2")) c.beta2 = std::stod(*v);
    if (auto v = get("epsilon")) c.epsilon = std::stod(*v);
    if (auto v = get("grad_clip")) c.grad_clip = std::stod(*v);
    if (auto v = get("augment_flip")) c.augment_flip = (*v == "1" || *v == "true");
    if (auto v = get("augment_crop")) c.augment_crop = (*v == "1" || *v == "true");
    if (auto v = get("seed")) c.seed = std::stoull(*v);
  } catch (const std::logic_error&) {
    throw format_error("training config holds a non-numeric value");
  }
  if (c.iterations < 0) throw invalid_argument("iterations must be non-negative");
  if (!(c.learning_rate > 0.0)) throw invalid_argument("learning_rate must be positive");
  return c;
}

template <typename T>
double loss_and_gradients(const ModelConfig& model, const ModelParams<T>& params, const TrainSample& sample,
                          ModelParams<T>* gradients) {
  check_sample(model, sample);
  Graph<T> g;
  const ParamVars p = bind_params(g, params, gradients != nullptr);
  const Var bins = g.constant(grid_to_tensor<T>(sample.grid));
  const std::vector<Var> flows = forward_sequence(g, model, p, bins);
  // Only the final output V_{0,B-1} is supervised.
  const Var loss = l1_mean(g, flows.back(), flow_tensor<T>(sample.gt), sample.gt.valid);
  const double value = static_cast<double>(g.value(loss)[0]);
  if (gradients) {
    g.backward(loss);
    gradients->tensors.clear();
    for (const auto& [name, t] : params.tensors) {
      const Var v = p.at(name);
      gradients->tensors.emplace_back(name, g.has_grad(v) ? g.grad(v) : Tensor<T>(t.shape()));
    }
  }
  return value;
}

TrainSample flip_horizontal(const TrainSample& s) {
  TrainSample out = s;
  const int H = s.grid.height();
  const int W = s.grid.width();
  for (int b = 0; b < s.grid.bins(); ++b)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        out.grid.data[b * s.grid.bin_size() + static_cast<std::size_t>(y) * W + x] = s.grid.at(b, y, W - 1 - x);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const std::size_t dst = s.gt.index(y, x);
      const std::size_t src = s.gt.index(y, W - 1 - x);
      out.gt.u[dst] = -s.gt.u[src];
      out.gt.v[dst] = s.gt.v[src];
      out.gt.valid[dst] = s.gt.valid[src];
    }
  return out;
}

TrainSample crop(const TrainSample& s, int y0, int x0, int height, int width) {
  if (y0 < 0 || x0 < 0 || height < 1 || width < 1 || y0 + height > s.grid.height() || x0 + width > s.grid.width())
    throw invalid_argument("crop window exceeds the sample");
  TrainSample out;
  out.grid.spec = s.grid.spec;
  out.grid.spec.geometry = SensorGeometry{width, height};
  out.grid.kind = s.grid.kind;
  out.grid.data.resize(static_cast<std::size_t>(s.grid.bins()) * height * width);
  out.gt = FlowField(height, width, s.gt.duration_s);
  for (int b = 0; b < s.grid.bins(); ++b)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        out.grid.data[(static_cast<std::size_t>(b) * height + y) * width + x] = s.grid.at(b, y0 + y, x0 + x);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const std::size_t src = s.gt.index(y0 + y, x0 + x);
      const std::size_t dst = out.gt.index(y, x);
      out.gt.u[dst] = s.gt.u[src];
      out.gt.v[dst] = s.gt.v[src];
      out.gt.valid[dst] = s.gt.valid[src];
    }
  return out;
}

TrainResult train_toy(const ModelConfig& model, const TrainConfig& train, const std::vector<TrainSample>& dataset,
                      const TrainCallback& callback) {
  return train_toy(model, train, dataset, init_params<float>(model, train.seed), callback);
}

TrainResult train_toy(const ModelConfig& model, const TrainConfig& train, const std::vector<TrainSample>& dataset,
                      ModelParams<float> initial, const TrainCallback& callback) {
  validate_config(model);
  check_params(model, initial);
  if (dataset.empty()) throw invalid_argument("training set is empty");
  for (const auto& s : dataset) {
    check_sample(model, s);
    const bool exact = s.grid.height() == model.height && s.grid.width() == model.width;
    const bool croppable = train.augment_crop && s.grid.height() >= model.height && s.grid.width() >= model.width;
    if (!exact && !croppable)
      throw shape_error("sample geometry " + std::to_string(s.grid.width()) + "x" + std::to_string(s.grid.height()) +
                        " does not match the model's " + std::to_string(model.width) + "x" +
                        std::to_string(model.height));
  }

  TrainResult result;
  result.params = std::move(initial);
  std::vector<std::vector<double>> m, v;
  for (const auto& [name, t] : result.params.tensors) {
    m.emplace_back(t.size(), 0.0);
    v.emplace_back(t.size(), 0.0);
  }

  std::mt19937_64 rng(train.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  ModelParams<float> grads;
  double beta1_t = 1.0, beta2_t = 1.0;

  for (int it = 0; it < train.iterations; ++it) {
    if (cursor == order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const TrainSample* sample = &dataset[order[cursor++]];
    TrainSample augmented;
    if (sample->grid.height() != model.height || sample->grid.width() != model.width) {
      std::uniform_int_distribution<int> dy(0, sample->grid.height() - model.height);
      std::uniform_int_distribution<int> dx(0, sample->grid.width() - model.width);
      const int y0 = dy(rng);
      const int x0 = dx(rng);
      augmented = crop(*sample, y0, x0, model.height, model.width);
      sample = &augmented;
    }
    if (train.augment_flip && std::bernoulli_distribution(0.5)(rng)) {
      augmented = flip_horizontal(*sample);
      sample = &augmented;
    }

    const double loss = loss_and_gradients(model, result.params, *sample, &grads);
    double norm2 = 0.0;
    for (const auto& [name, gt] : grads.tensors)
      for (float x : gt.values()) norm2 += static_cast<double>(x) * x;
    if (!std::isfinite(loss) || !std::isfinite(norm2))
      throw numeric_error("training diverged at iteration " + std::to_string(it) + " (loss " + number(loss) + ")");
    const double clip = (train.grad_clip > 0.0 && std::sqrt(norm2) > train.grad_clip)
                            ? train.grad_clip / std::sqrt(norm2)
                            : 1.0;

    beta1_t *= train.beta1;
    beta2_t *= train.beta2;
    const double step = train.learning_rate * std::sqrt(1.0 - beta2_t) / (1.0 - beta1_t);
    for (std::size_t k = 0; k < result.params.tensors.size(); ++k) {
      Tensor<float>& w = result.params.tensors[k].second;
      const Tensor<float>& gk = grads.tensors[k].second;
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = static_cast<double>(gk[i]) * clip;
        m[k][i] = train.beta1 * m[k][i] + (1.0 - train.beta1) * gi;
        v[k][i] = train.beta2 * v[k][i] + (1.0 - train.beta2) * gi * gi;
        w[i] = static_cast<float>(static_cast<double>(w[i]) - step * m[k][i] / (std::sqrt(v[k][i]) + train.epsilon));
      }
    }
    result.losses.push_back(loss);
    if (callback) callback(it, loss);
  }
  return result;
}

double final_flow_epe(const ModelConfig& model, const ModelParams<float>& params,
                      const std::vector<TrainSample>& dataset) {
  if (dataset.empty()) throw invalid_argument("evaluation set is empty");
  double total = 0.0;
  for (const auto& s : dataset) {
    const FlowSequence seq = model_forward(s.grid, model, params);
    total += epe(seq.flows.back(), s.gt);
  }
  return total / static_cast<double>(dataset.size());
}

std::vector<TrainSample> load_training_set(const std::string& dir, int bins) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw io_error("'" + dir + "' is not a directory");
  std::vector<fs::path> event_files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto& p = entry.path();
    if (p.extension() == ".evt1" && p.stem().string().rfind("sample_", 0) == 0) event_files.push_back(p);
  }
  std::sort(event_files.begin(), event_files.end());
  if (event_files.empty()) throw data_error("no sample_*.evt1 files in '" + dir + "'");
  std::vector<TrainSample> set;
  for (const auto& ev : event_files) {
    fs::path flow_path = ev;
    flow_path.replace_extension(".evaf");
    const EventWindow window = load_events(ev.string());
    TrainSample s{build_unified_voxel_grid(window, make_bin_spec(window, bins)), load_flow(flow_path.string())};
    if (s.gt.height != window.geometry().height || s.gt.width != window.geometry().width)
      throw data_error("'" + flow_path.string() + "' geometry differs from its events");
    set.push_back(std::move(s));
  }
  return set;
}

template double loss_and_gradients<float>(const ModelConfig&, const ModelParams<float>&, const TrainSample&,
                                          ModelParams<float>*);
template double loss_and_gradients<double>(const ModelConfig&, const ModelParams<double>&, const TrainSample&,
                                           ModelParams<double>*);

}  // namespace evaflow::nn
