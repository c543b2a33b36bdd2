#include "evaflow/nn/model.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "evaflow/detail/binary_io.hpp"
#include "evaflow/error.hpp"
#include "evaflow/nn/ops.hpp"

namespace evaflow::nn {

namespace {

constexpr char kParamsMagic[5] = "EVP1";

std::string level_prefix(int level) { return "smr" + std::to_string(level); }

int gru_input_channels(const ModelConfig& c, int level) {
  const bool has_coarse_hidden = level < c.levels - 1;
  return 2 + c.channels[level] + (has_coarse_hidden ? c.hidden[level] : 0);
}

Var param(const ParamVars& p, const std::string& name) {
  const auto it = p.find(name);
  if (it == p.end()) throw invalid_argument("missing model parameter '" + name + "'");
  return it->second;
}

std::vector<int> split_ints(const std::string& text) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string token = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (token.empty()) throw format_error("empty entry in integer list '" + text + "'");
    out.push_back(std::stoi(token));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string join_ints(const std::vector<int>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) s += (i ? "," : "") + std::to_string(values[i]);
  return s;
}

}  // namespace

void validate_config(const ModelConfig& c) {
  if (c.levels < 2) throw invalid_argument("model needs at least 2 pyramid levels");
  if (static_cast<int>(c.channels.size()) != c.levels || static_cast<int>(c.hidden.size()) != c.levels)
    throw invalid_argument("channels and hidden lists need one entry per level");
  for (int l = 0; l < c.levels; ++l)
    if (c.channels[l] < 1 || c.hidden[l] < 1) throw invalid_argument("channel counts must be positive");
  if (c.head_mid < 1) throw invalid_argument("flow head width must be positive");
  if (c.bins < 2) throw invalid_argument("model needs at least 2 bins");
  const int coarsest = 1 << c.levels;
  if (c.height < coarsest || c.width < coarsest || c.height % coarsest || c.width % coarsest)
    throw invalid_argument("input " + std::to_string(c.height) + "x" + std::to_string(c.width) +
                           " must be a multiple of " + std::to_string(coarsest));
}

std::map<std::string, std::string> config_to_map(const ModelConfig& c) {
  std::ostringstream slope;
  slope.precision(17);
  slope << c.leaky_slope;
  return {{"bins", std::to_string(c.bins)},
          {"levels", std::to_string(c.levels)},
          {"channels", join_ints(c.channels)},
          {"hidden", join_ints(c.hidden)},
          {"head_mid", std::to_string(c.head_mid)},
          {"height", std::to_string(c.height)},
          {"width", std::to_string(c.width)},
          {"leaky_slope", slope.str()},
          {"temporal_flow_prior", c.temporal_flow_prior ? "1" : "0"}};
}

ModelConfig config_from_map(const std::map<std::string, std::string>& values) {
  ModelConfig c;
  auto get = [&](const char* key) -> const std::string* {
    const auto it = values.find(key);
    return it == values.end() ? nullptr : &it->second;
  };
  try {
    if (auto v = get("bins")) c.bins = std::stoi(*v);
    if (auto v = get("levels")) c.levels = std::stoi(*v);
    if (auto v = get("channels")) c.channels = split_ints(*v);
    if (auto v = get("hidden")) c.hidden = split_ints(*v);
    else if (get("channels")) c.hidden = c.channels;
    if (auto v = get("head_mid")) c.head_mid = std::stoi(*v);
    if (auto v = get("height")) c.height = std::stoi(*v);
    if (auto v = get("width")) c.width = std::stoi(*v);
    if (auto v = get("leaky_slope")) c.leaky_slope = std::stod(*v);
    if (auto v = get("temporal_flow_prior")) c.temporal_flow_prior = (*v == "1" || *v == "true");
  } catch (const std::logic_error&) {
    throw format_error("model config holds a non-numeric value");
  }
  validate_config(c);
  return c;
}

template <typename T>
Tensor<T>& ModelParams<T>::get(const std::string& name) {
  for (auto& [n, t] : tensors)
    if (n == name) return t;
  throw invalid_argument("missing model parameter '" + name + "'");
}

template <typename T>
const Tensor<T>& ModelParams<T>::get(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw invalid_argument("missing model parameter '" + name + "'");
}

template <typename T>
bool ModelParams<T>::contains(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return true;
  return false;
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors) n += t.size();
  return n;
}

std::vector<std::pair<std::string, std::vector<int>>> parameter_layout(const ModelConfig& c) {
  validate_config(c);
  std::vector<std::pair<std::string, std::vector<int>>> layout;
  auto conv = [&](const std::string& name, int cout, int cin, int k) {
    layout.emplace_back(name + ".w", std::vector<int>{cout, cin, k, k});
    layout.emplace_back(name + ".b", std::vector<int>{cout});
  };
  conv("enc.stem", c.channels[0], 1, 3);
  for (int l = 0; l < c.levels; ++l) conv("enc.down" + std::to_string(l), c.channels[l], l == 0 ? c.channels[0] : c.channels[l - 1], 3);
  for (int l = 0; l < c.levels; ++l) {
    const std::string pre = level_prefix(l);
    const int gin = c.hidden[l] + gru_input_channels(c, l);
    conv(pre + ".gru.z", c.hidden[l], gin, 3);
    conv(pre + ".gru.r", c.hidden[l], gin, 3);
    conv(pre + ".gru.q", c.hidden[l], gin, 3);
    conv(pre + ".head1", c.head_mid, c.hidden[l], 3);
    conv(pre + ".head2", 2, c.head_mid, 3);
    if (l < c.levels - 1) conv(pre + ".adapter", c.hidden[l], c.hidden[l + 1], 1);
  }
  return layout;
}

template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelParams<T> params;
  for (const auto& [name, shape] : parameter_layout(config)) {
    Tensor<T> t(shape);
    if (shape.size() == 4) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(shape[1] * shape[2] * shape[3]));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(dist(rng));
    }
    params.tensors.emplace_back(name, std::move(t));
  }
  return params;
}

template <typename T>
void check_params(const ModelConfig& config, const ModelParams<T>& params) {
  const auto layout = parameter_layout(config);
  if (layout.size() != params.tensors.size())
    throw shape_error("parameter set holds " + std::to_string(params.tensors.size()) + " tensors, config expects " +
                      std::to_string(layout.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].first != params.tensors[i].first || layout[i].second != params.tensors[i].second.shape())
      throw shape_error("parameter '" + params.tensors[i].first + "' " + shape_string(params.tensors[i].second.shape()) +
                        " does not match expected '" + layout[i].first + "' " + shape_string(layout[i].second));
  }
}

std::vector<char> encode_params(const ModelParams<float>& params) {
  detail::ByteWriter w;
  w.put_magic(kParamsMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.tensors.size()));
  for (const auto& [name, t] : params.tensors) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.put_bytes(name.data(), name.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    w.put_bytes(t.data(), t.size() * sizeof(float));
  }
  return w.bytes();
}

void save_params(const ModelParams<float>& params, const std::string& path) {
  detail::ByteWriter w;
  const auto bytes = encode_params(params);
  w.put_bytes(bytes.data(), bytes.size());
  w.write_to(path);
}

ModelParams<float> load_params(const std::string& path) {
  auto r = detail::ByteReader::from_file(path);
  r.expect_magic(kParamsMagic);
  const auto count = r.get<std::uint32_t>("tensor count");
  ModelParams<float> params;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto name_len = r.get<std::uint32_t>("name length");
    if (name_len > r.remaining()) throw format_error(path + ": truncated tensor name");
    std::string name(name_len, '\0');
    r.get_bytes(name.data(), name_len, "name");
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank > 8) throw format_error(path + ": tensor '" + name + "' has implausible rank " + std::to_string(rank));
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(r.get<std::uint32_t>("extent"));
    Tensor<float> t(shape);
    r.get_bytes(t.data(), t.size() * sizeof(float), "tensor data");
    params.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (r.remaining() != 0) throw format_error(path + ": trailing bytes after the last tensor");
  return params;
}

template <typename T>
ParamVars bind_params(Graph<T>& g, const ModelParams<T>& params, bool trainable) {
  ParamVars vars;
  for (const auto& [name, t] : params.tensors) vars.emplace(name, g.parameter(t, trainable));
  return vars;
}

template <typename T>
std::vector<Var> encoder_forward(Graph<T>& g, const ModelConfig& c, const ParamVars& p, Var bins) {
  const Tensor<T>& in = g.value(bins);
  if (in.rank() != 4 || in.dim(1) != 1 || in.dim(2) != c.height || in.dim(3) != c.width)
    throw shape_error("encoder input " + shape_string(in.shape()) + " does not match configured (N,1," +
                      std::to_string(c.height) + "," + std::to_string(c.width) + ")");
  const T slope = static_cast<T>(c.leaky_slope);
  Var x = leaky_relu(g, conv2d(g, bins, param(p, "enc.stem.w"), param(p, "enc.stem.b"), 1, 1), slope);
  std::vector<Var> pyramid;
  for (int l = 0; l < c.levels; ++l) {
    const std::string pre = "enc.down" + std::to_string(l);
    x = leaky_relu(g, conv2d(g, x, param(p, pre + ".w"), param(p, pre + ".b"), 2, 1), slope);
    pyramid.push_back(x);
  }
  return pyramid;
}

template <typename T>
Var convgru_cell(Graph<T>& g, const ParamVars& p, const std::string& prefix, Var h, Var x) {
  const Var hx = concat_channels(g, {h, x});
  const Var z = sigmoid(g, conv2d(g, hx, param(p, prefix + ".z.w"), param(p, prefix + ".z.b"), 1, 1));
  const Var r = sigmoid(g, conv2d(g, hx, param(p, prefix + ".r.w"), param(p, prefix + ".r.b"), 1, 1));
  const Var rhx = concat_channels(g, {mul(g, r, h), x});
  const Var q = tanh(g, conv2d(g, rhx, param(p, prefix + ".q.w"), param(p, prefix + ".q.b"), 1, 1));
  return add(g, mul(g, one_minus(g, z), h), mul(g, z, q));
}

template <typename T>
SmrOutput smr_step(Graph<T>& g, const ModelConfig& c, const ParamVars& p, int level, Var features, Var flow_coarse,
                   Var hidden_coarse, Var h_prev) {
  if (level < 0 || level >= c.levels) throw invalid_argument("smr_step: level out of range");
  if (hidden_coarse.defined() == (level == c.levels - 1))
    throw invalid_argument("smr_step: a coarser hidden state is required exactly below the coarsest level");
  const std::string pre = level_prefix(level);
  const Var warped = warp(g, features, flow_coarse);
  std::vector<Var> parts{flow_coarse, warped};
  if (hidden_coarse.defined()) parts.push_back(hidden_coarse);
  const Var x = concat_channels(g, parts);
  const Var h = convgru_cell(g, p, pre + ".gru", h_prev, x);
  const Var mid = relu(g, conv2d(g, h, param(p, pre + ".head1.w"), param(p, pre + ".head1.b"), 1, 1));
  const Var delta = conv2d(g, mid, param(p, pre + ".head2.w"), param(p, pre + ".head2.b"), 1, 1);
  return {add(g, flow_coarse, delta), h};
}

template <typename T>
std::vector<Var> zero_hidden(Graph<T>& g, const ModelConfig& c) {
  std::vector<Var> h;
  for (int l = 0; l < c.levels; ++l)
    h.push_back(g.constant(Tensor<T>({1, c.hidden[l], c.height / c.stride(l), c.width / c.stride(l)})));
  return h;
}

template <typename T>
Var zero_coarsest_flow(Graph<T>& g, const ModelConfig& c) {
  const int l = c.levels - 1;
  return g.constant(Tensor<T>({1, 2, c.height / c.stride(l), c.width / c.stride(l)}));
}

template <typename T>
StackOutput stack_step(Graph<T>& g, const ModelConfig& c, const ParamVars& p, const std::vector<Var>& pyramid,
                       const std::vector<Var>& h_prev, Var coarsest_prior) {
  if (static_cast<int>(pyramid.size()) != c.levels || static_cast<int>(h_prev.size()) != c.levels)
    throw shape_error("stack_step: need one feature map and one hidden state per level");
  StackOutput out;
  out.hidden.resize(c.levels);
  Var flow_prior = coarsest_prior;
  Var hidden_coarse;
  for (int l = c.levels - 1; l >= 0; --l) {
    const SmrOutput smr = smr_step(g, c, p, l, pyramid[l], flow_prior, hidden_coarse, h_prev[l]);
    out.hidden[l] = smr.hidden;
    if (l == c.levels - 1) out.coarsest_flow = smr.flow;
    const Var up_flow = scale(g, upsample2x(g, smr.flow), T(2));
    if (l > 0) {
      const std::string adapter = level_prefix(l - 1) + ".adapter";
      flow_prior = up_flow;
      hidden_coarse = conv2d(g, upsample2x(g, smr.hidden), param(p, adapter + ".w"), param(p, adapter + ".b"), 1, 0);
    } else {
      out.flow_full = up_flow;
    }
  }
  return out;
}

template <typename T>
std::vector<Var> forward_sequence(Graph<T>& g, const ModelConfig& c, const ParamVars& p, Var bins) {
  const int B = g.value(bins).dim(0);
  if (B < 2) throw shape_error("forward_sequence: need at least two bins");
  const std::vector<Var> features = encoder_forward(g, c, p, bins);
  std::vector<Var> hidden = zero_hidden(g, c);
  const Var zero_prior = zero_coarsest_flow(g, c);
  Var prior = zero_prior;
  std::vector<Var> flows;
  for (int j = 0; j < B; ++j) {
    std::vector<Var> pyramid;
    for (Var f : features) pyramid.push_back(slice_batch(g, f, j));
    StackOutput step = stack_step(g, c, p, pyramid, hidden, c.temporal_flow_prior ? prior : zero_prior);
    hidden = step.hidden;
    // Bin 0 only primes the hidden states; its flow is not an output.
    if (j == 0) continue;
    prior = step.coarsest_flow;
    flows.push_back(step.flow_full);
  }
  return flows;
}

template <typename T>
FlowField tensor_to_flow(const Tensor<T>& t, double duration_s) {
  if (t.rank() != 4 || t.dim(0) != 1 || t.dim(1) != 2) throw shape_error("flow tensor must be (1,2,H,W)");
  FlowField f(t.dim(2), t.dim(3), duration_s);
  const std::size_t plane = f.size();
  for (std::size_t i = 0; i < plane; ++i) {
    f.u[i] = static_cast<double>(t[i]);
    f.v[i] = static_cast<double>(t[plane + i]);
  }
  return f;
}

template <typename T>
Tensor<T> grid_to_tensor(const Grid& grid) {
  Tensor<T> t({grid.bins(), 1, grid.height(), grid.width()});
  for (std::size_t i = 0; i < grid.data.size(); ++i) t[i] = static_cast<T>(grid.data[i]);
  return t;
}

namespace {

template <typename T>
Tensor<T> bin_tensor(const ModelConfig& c, std::span<const float> bin) {
  if (bin.size() != static_cast<std::size_t>(c.height) * c.width)
    throw shape_error("bin holds " + std::to_string(bin.size()) + " values, model expects " +
                      std::to_string(c.height) + "x" + std::to_string(c.width));
  Tensor<T> t({1, 1, c.height, c.width});
  for (std::size_t i = 0; i < bin.size(); ++i) t[i] = static_cast<T>(bin[i]);
  return t;
}

template <typename T>
void advance(ModelState<T>& state, const ModelConfig& c, const ModelParams<T>& params, std::span<const float> bin,
             bool emit) {
  Graph<T> g;
  const ParamVars p = bind_params(g, params, false);
  const Var x = g.constant(bin_tensor<T>(c, bin));
  const std::vector<Var> pyramid = encoder_forward(g, c, p, x);
  std::vector<Var> hidden;
  if (state.hidden.empty()) {
    hidden = zero_hidden(g, c);
  } else {
    for (const auto& h : state.hidden) hidden.push_back(g.constant(h));
  }
  const Var prior = (c.temporal_flow_prior && !state.coarsest_flow.empty()) ? g.constant(state.coarsest_flow)
                                                                             : zero_coarsest_flow(g, c);
  const StackOutput out = stack_step(g, c, p, pyramid, hidden, prior);
  state.hidden.clear();
  for (Var h : out.hidden) state.hidden.push_back(g.value(h));
  ++state.step;
  if (emit) {
    state.coarsest_flow = g.value(out.coarsest_flow);
    state.last_flow = tensor_to_flow(g.value(out.flow_full), state.step * state.tau_s);
  }
}

}  // namespace

template <typename T>
ModelState<T> model_init(const ModelConfig& c, const ModelParams<T>& params, std::span<const float> bin0, double tau_s,
                         double t0_s) {
  validate_config(c);
  check_params(c, params);
  if (!(tau_s > 0.0)) throw invalid_argument("model_init: tau must be positive");
  ModelState<T> state;
  state.tau_s = tau_s;
  state.t0_s = t0_s;
  advance(state, c, params, bin0, false);
  return state;
}

template <typename T>
FlowField model_step(ModelState<T>& state, const ModelConfig& c, const ModelParams<T>& params,
                     std::span<const float> bin) {
  if (!state.initialized()) throw invalid_argument("model_step called before model_init consumed the first bin");
  advance(state, c, params, bin, true);
  return *state.last_flow;
}

template <typename T>
FlowSequence model_forward(const Grid& grid, const ModelConfig& c, const ModelParams<T>& params) {
  validate_config(c);
  check_params(c, params);
  if (grid.kind != GridKind::kUnifiedVoxelGrid) throw shape_error("model_forward expects a unified voxel grid");
  if (grid.bins() != c.bins || grid.height() != c.height || grid.width() != c.width)
    throw shape_error("grid " + std::to_string(grid.bins()) + "x" + std::to_string(grid.height()) + "x" +
                      std::to_string(grid.width()) + " does not match the model's " + std::to_string(c.bins) + "x" +
                      std::to_string(c.height) + "x" + std::to_string(c.width));
  Graph<T> g;
  const ParamVars p = bind_params(g, params, false);
  const Var bins = g.constant(grid_to_tensor<T>(grid));
  const std::vector<Var> flows = forward_sequence(g, c, p, bins);
  FlowSequence seq;
  seq.t0_s = grid.spec.t0_s;
  seq.tau_s = grid.spec.tau_s;
  for (std::size_t j = 0; j < flows.size(); ++j)
    seq.flows.push_back(tensor_to_flow(g.value(flows[j]), static_cast<double>(j + 1) * grid.spec.tau_s));
  return seq;
}

#define EVAFLOW_INSTANTIATE_MODEL(T)                                                                               \
  template struct ModelParams<T>;                                                                                  \
  template ModelParams<T> init_params<T>(const ModelConfig&, std::uint64_t);                                       \
  template void check_params<T>(const ModelConfig&, const ModelParams<T>&);                                        \
  template ParamVars bind_params<T>(Graph<T>&, const ModelParams<T>&, bool);                                       \
  template std::vector<Var> encoder_forward<T>(Graph<T>&, const ModelConfig&, const ParamVars&, Var);              \
  template Var convgru_cell<T>(Graph<T>&, const ParamVars&, const std::string&, Var, Var);                         \
  template SmrOutput smr_step<T>(Graph<T>&, const ModelConfig&, const ParamVars&, int, Var, Var, Var, Var);        \
  template StackOutput stack_step<T>(Graph<T>&, const ModelConfig&, const ParamVars&, const std::vector<Var>&,     \
                                     const std::vector<Var>&, Var);                                                \
  template std::vector<Var> zero_hidden<T>(Graph<T>&, const ModelConfig&);                                         \
  template Var zero_coarsest_flow<T>(Graph<T>&, const ModelConfig&);                                               \
  template std::vector<Var> forward_sequence<T>(Graph<T>&, const ModelConfig&, const ParamVars&, Var);             \
  template ModelState<T> model_init<T>(const ModelConfig&, const ModelParams<T>&, std::span<const float>, double,  \
                                       double);                                                                    \
  template FlowField model_step<T>(ModelState<T>&, const ModelConfig&, const ModelParams<T>&,                      \
                                   std::span<const float>);                                                        \
  template FlowSequence model_forward<T>(const Grid&, const ModelConfig&, const ModelParams<T>&);                  \
  template FlowField tensor_to_flow<T>(const Tensor<T>&, double);                                                  \
  template Tensor<T> grid_to_tensor<T>(const Grid&);

EVAFLOW_INSTANTIATE_MODEL(float)
EVAFLOW_INSTANTIATE_MODEL(double)

}  // namespace evaflow::nn
