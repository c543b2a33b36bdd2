#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "evaflow/config.hpp"
#include "evaflow/error.hpp"
#include "evaflow/events.hpp"
#include "evaflow/flow.hpp"
#include "evaflow/manifest.hpp"
#include "evaflow/metrics.hpp"
#include "evaflow/mocomp.hpp"
#include "evaflow/nn/model.hpp"
#include "evaflow/nn/train.hpp"
#include "evaflow/representation.hpp"
#include "evaflow/simulate.hpp"
#include "evaflow/visualize.hpp"

namespace evaflow::cli {

namespace fs = std::filesystem;

namespace {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

std::string num(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void require_file(const std::string& flag, const std::string& path) {
  if (!fs::is_regular_file(path)) throw io_error(flag + ": no such file '" + path + "'");
}

void require_dir(const std::string& flag, const std::string& path) {
  if (!fs::is_directory(path)) throw io_error(flag + ": no such directory '" + path + "'");
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec || !fs::is_directory(path)) throw io_error("cannot create directory '" + path + "'");
}

std::string indexed_name(const std::string& stem, int index, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%04d", index);
  return stem + buf + ext;
}

Point2 parse_point(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw invalid_argument("--seeds: expected x,y but got '" + text + "'");
  try {
    std::size_t used_x = 0, used_y = 0;
    const std::string xs = text.substr(0, comma), ys = text.substr(comma + 1);
    Point2 p{std::stod(xs, &used_x), std::stod(ys, &used_y)};
    if (used_x != xs.size() || used_y != ys.size()) throw std::invalid_argument("trailing");
    return p;
  } catch (const std::logic_error&) {
    throw invalid_argument("--seeds: expected x,y but got '" + text + "'");
  }
}

/// Every subcommand fills one of these; run() writes the manifest once the command succeeded.
struct Outcome {
  RunManifest manifest;
  std::string manifest_path;  // empty: print to the diagnostic stream
};

// ---- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string motion = "const";
  double speed = 40.0;
  double speed_jitter = 0.0;
  std::optional<double> direction_deg;
  bool random_sign = false;
  double center_jitter = 0.0;
  double duration = 0.1;
  double rate = 1.0;
  std::uint64_t seed = 0;
  int samples = 1;
  int points = 150;
  double margin = 2.0;
  double noise = 0.0;
  int width = 64;
  int height = 64;
  std::string out;
};

Outcome run_simulate(const SimulateArgs& a, std::ostream& out) {
  if (a.motion != "const" && a.motion != "arc") throw invalid_argument("--motion must be const or arc");
  if (a.samples < 1) throw invalid_argument("--samples must be at least 1");
  if (!(a.duration > 0.0)) throw invalid_argument("--duration must be positive");
  if (!(a.rate > 0.0)) throw invalid_argument("--rate must be positive");
  if (a.speed_jitter < 0.0 || a.speed_jitter >= 1.0) throw invalid_argument("--speed-jitter must lie in [0, 1)");
  const SensorGeometry geom{a.width, a.height};
  validate_geometry(geom);
  ensure_dir(a.out);
  Stopwatch clock;
  std::mt19937_64 rng(a.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t total_events = 0;
  Outcome o;
  for (int k = 0; k < a.samples; ++k) {
    const double speed = a.speed * (1.0 + a.speed_jitter * (2.0 * unit(rng) - 1.0));
    MotionModel motion;
    if (a.motion == "const") {
      const double dir = a.direction_deg ? *a.direction_deg * std::numbers::pi / 180.0 : 2.0 * std::numbers::pi * unit(rng);
      motion = MotionModel::constant_velocity(speed * std::cos(dir), speed * std::sin(dir));
    } else {
      const double sign = (a.random_sign && unit(rng) < 0.5) ? -1.0 : 1.0;
      const double cx = 0.5 * (a.width - 1) + a.center_jitter * (2.0 * unit(rng) - 1.0);
      const double cy = 0.5 * (a.height - 1) + a.center_jitter * (2.0 * unit(rng) - 1.0);
      motion = MotionModel::circular_arc(cx, cy, sign * speed);
    }
    const ScenePattern pattern = make_random_pattern(geom, a.points, a.margin, rng());
    SimulationOptions options;
    options.rate = a.rate;
    options.noise_rate = a.noise;
    options.seed = rng();
    const EventWindow window = generate_events(pattern, motion, a.duration, options);
    const FlowField gt = ground_truth_flow(motion, 0.0, a.duration, geom);
    const std::string ev_path = (fs::path(a.out) / indexed_name("sample", k, ".evt1")).string();
    const std::string gt_path = (fs::path(a.out) / indexed_name("sample", k, ".evaf")).string();
    save_events(window, ev_path, EventFormat::kBinary);
    save_flow(gt, gt_path);
    o.manifest.outputs[indexed_name("events", k, "")] = ev_path;
    o.manifest.outputs[indexed_name("flow", k, "")] = gt_path;
    total_events += window.size();
  }
  o.manifest.timings_s["simulate"] = clock.lap();
  o.manifest.results["events"] = std::to_string(total_events);
  out << "wrote " << a.samples << " sample(s), " << total_events << " events to " << a.out << "\n";
  o.manifest_path = (fs::path(a.out) / "manifest.txt").string();
  return o;
}

// ---- voxelize / stream ------------------------------------------------------

struct VoxelizeArgs {
  std::string in;
  int bins = 15;
  std::optional<double> tau;
  std::string kind = "uvg";
  std::string out;
};

BinSpec resolve_spec(const EventWindow& window, const VoxelizeArgs& a) {
  if (!a.tau) return make_bin_spec(window, a.bins);
  BinSpec spec;
  spec.bins = a.bins;
  spec.tau_s = *a.tau;
  spec.t0_s = window.t_start_seconds();
  spec.geometry = window.geometry();
  validate_bin_spec(spec);
  return spec;
}

void describe_grid(RunManifest& m, const Grid& g, const BuildReport& r) {
  m.results["bins"] = std::to_string(g.bins());
  m.results["tau_s"] = num(g.spec.tau_s);
  m.results["t0_s"] = num(g.spec.t0_s);
  m.results["accumulated"] = std::to_string(r.accumulated);
  m.results["dropped_temporal"] = std::to_string(r.dropped_temporal);
  m.results["dropped_spatial"] = std::to_string(r.dropped_spatial);
}

Outcome run_voxelize(const VoxelizeArgs& a, std::ostream& out) {
  if (a.kind != "uvg" && a.kind != "vg") throw invalid_argument("--kind must be uvg or vg");
  if (a.kind == "vg" && a.tau) throw invalid_argument("--tau only applies to --kind uvg");
  require_file("--in", a.in);
  Stopwatch clock;
  Outcome o;
  const EventWindow window = load_events(a.in);
  o.manifest.timings_s["load"] = clock.lap();
  BuildReport report;
  const Grid grid = a.kind == "vg" ? build_voxel_grid(window, a.bins, &report)
                                   : build_unified_voxel_grid(window, resolve_spec(window, a), &report);
  o.manifest.timings_s["build"] = clock.lap();
  save_grid(grid, a.out);
  o.manifest.timings_s["save"] = clock.lap();
  describe_grid(o.manifest, grid, report);
  out << "wrote " << a.kind << " grid B=" << grid.bins() << " tau=" << grid.spec.tau_s << "s to " << a.out << "\n";
  o.manifest.outputs["grid"] = a.out;
  o.manifest_path = a.out + ".manifest.txt";
  return o;
}

Outcome run_stream(const VoxelizeArgs& a, std::ostream& out) {
  require_file("--in", a.in);
  Stopwatch clock;
  Outcome o;
  const EventWindow window = load_events(a.in);
  o.manifest.timings_s["load"] = clock.lap();
  const BinSpec spec = resolve_spec(window, a);
  UvgStreamer streamer(spec);
  std::vector<EmittedBin> bins;
  std::vector<std::size_t> emitted_after;  // events consumed when each bin was released
  std::size_t consumed = 0;
  for (const Event& e : window.events()) {
    for (auto& b : streamer.push(e)) {
      emitted_after.push_back(consumed);
      bins.push_back(std::move(b));
    }
    ++consumed;
  }
  for (auto& b : streamer.finish()) {
    emitted_after.push_back(consumed);
    bins.push_back(std::move(b));
  }
  const Grid grid = assemble_grid(spec, bins);
  o.manifest.timings_s["build"] = clock.lap();
  save_grid(grid, a.out);
  o.manifest.timings_s["save"] = clock.lap();
  describe_grid(o.manifest, grid, streamer.report());
  for (std::size_t b = 0; b < emitted_after.size(); ++b)
    o.manifest.results[indexed_name("bin", static_cast<int>(b), ".events_before_emit")] = std::to_string(emitted_after[b]);
  out << "streamed " << window.size() << " events into B=" << grid.bins() << " bins, wrote " << a.out << "\n";
  o.manifest.outputs["grid"] = a.out;
  o.manifest_path = a.out + ".manifest.txt";
  return o;
}

// ---- mocomp -----------------------------------------------------------------

struct MocompArgs {
  std::string events;
  std::string flow;
  std::optional<double> tref;
  std::string out_prefix;
};

Outcome run_mocomp(const MocompArgs& a, std::ostream& out) {
  require_file("--events", a.events);
  require_file("--flow", a.flow);
  Stopwatch clock;
  Outcome o;
  const EventWindow window = load_events(a.events);
  const FlowField flow = load_flow(a.flow);
  const double t_ref = a.tref.value_or(window.t_start_seconds());
  o.manifest.timings_s["load"] = clock.lap();
  const WarpLossReport r = warp_loss_report(window, flow, t_ref);
  const MCFrame raw = event_count_image(window, t_ref);
  const MCFrame mc = motion_compensate(window, flow, t_ref);
  o.manifest.timings_s["compensate"] = clock.lap();
  const std::string raw_path = a.out_prefix + "_raw.pgm";
  const std::string mc_path = a.out_prefix + "_mc.pgm";
  const std::string report_path = a.out_prefix + "_report.txt";
  render_count_image(raw, raw_path);
  render_count_image(mc, mc_path);
  const std::map<std::string, std::string> values{{"t_ref_s", num(t_ref)},
                                                  {"n_total", std::to_string(r.n_total)},
                                                  {"n_in", std::to_string(r.n_in)},
                                                  {"var_raw", num(r.var_raw)},
                                                  {"var_compensated", num(r.var_compensated)},
                                                  {"var_raw_normalized", num(r.var_raw_normalized)},
                                                  {"var_compensated_normalized", num(r.var_compensated_normalized)},
                                                  {"fwl", num(r.fwl)},
                                                  {"rfwl", num(r.rfwl)}};
  write_key_values(values, report_path);
  o.manifest.timings_s["save"] = clock.lap();
  o.manifest.results = values;
  out << "fwl=" << num(r.fwl) << " rfwl=" << num(r.rfwl) << " kept " << r.n_in << "/" << r.n_total << " events\n";
  o.manifest.outputs["raw_frame"] = raw_path;
  o.manifest.outputs["mc_frame"] = mc_path;
  o.manifest.outputs["report"] = report_path;
  o.manifest_path = a.out_prefix + ".manifest.txt";
  return o;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string ae_convention = "3d";
  std::string outlier_convention = "relative";
  std::string out;
};

Outcome run_eval(const EvalArgs& a, std::ostream& out) {
  if (a.ae_convention != "3d" && a.ae_convention != "2d") throw invalid_argument("--ae-convention must be 3d or 2d");
  if (a.outlier_convention != "relative" && a.outlier_convention != "absolute")
    throw invalid_argument("--outlier-convention must be relative or absolute");
  require_file("--pred", a.pred);
  require_file("--gt", a.gt);
  Stopwatch clock;
  Outcome o;
  const FlowField pred = load_flow(a.pred);
  const FlowField gt = load_flow(a.gt);
  const EvalReport r = evaluate(pred, gt,
                                a.ae_convention == "3d" ? AngularConvention::kHomogeneous3d : AngularConvention::kPlanar2d,
                                a.outlier_convention == "relative" ? OutlierConvention::kAbsoluteAndRelative
                                                                   : OutlierConvention::kAbsoluteOnly);
  o.manifest.timings_s["evaluate"] = clock.lap();
  const std::string table = std::string(kMetricsHeader) + "\n" + format_metrics_row(r) + "\n";
  out << table;
  if (!a.out.empty()) {
    std::ofstream f(a.out, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("--out: cannot open '" + a.out + "' for writing");
    f << table;
    o.manifest.outputs["metrics"] = a.out;
    o.manifest_path = a.out + ".manifest.txt";
  }
  o.manifest.results["row"] = format_metrics_row(r);
  return o;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string data_dir;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  std::string out_params;
  int log_every = 0;
};

Outcome run_train(const TrainArgs& a, std::ostream& out) {
  require_dir("--data-dir", a.data_dir);
  std::map<std::string, std::string> values;
  if (!a.config.empty()) {
    require_file("--config", a.config);
    values = read_key_values(a.config);
  }
  const auto model_keys = nn::config_to_map(nn::ModelConfig{});
  const auto train_keys = nn::train_config_to_map(nn::TrainConfig{});
  for (const auto& [k, v] : values)
    if (!model_keys.count(k) && !train_keys.count(k)) throw format_error("--config: unknown key '" + k + "'");
  if (a.seed) values["seed"] = std::to_string(*a.seed);
  if (a.iterations) values["iterations"] = std::to_string(*a.iterations);

  Stopwatch clock;
  Outcome o;
  const int bins = values.count("bins") ? std::stoi(values.at("bins")) : nn::ModelConfig{}.bins;
  const std::vector<nn::TrainSample> data = nn::load_training_set(a.data_dir, bins);
  if (!values.count("height")) values["height"] = std::to_string(data.front().grid.height());
  if (!values.count("width")) values["width"] = std::to_string(data.front().grid.width());
  const nn::ModelConfig model = nn::config_from_map(values);
  const nn::TrainConfig train = nn::train_config_from_map(values);
  o.manifest.timings_s["load"] = clock.lap();

  const nn::TrainResult result = nn::train_toy(model, train, data, [&](int it, double loss) {
    if (a.log_every > 0 && it % a.log_every == 0) out << "iteration " << it << " loss " << fixed(loss, 6) << "\n";
  });
  o.manifest.timings_s["train"] = clock.lap();
  const double final_epe = nn::final_flow_epe(model, result.params, data);
  o.manifest.timings_s["evaluate"] = clock.lap();

  nn::save_params(result.params, a.out_params);
  const std::string cfg_path = a.out_params + ".cfg";
  write_key_values(nn::config_to_map(model), cfg_path);
  const std::string loss_path = a.out_params + ".loss.csv";
  {
    std::ofstream f(loss_path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("cannot open '" + loss_path + "' for writing");
    f << "iteration,loss\n";
    for (std::size_t i = 0; i < result.losses.size(); ++i) f << i << "," << num(result.losses[i]) << "\n";
  }
  o.manifest.timings_s["save"] = clock.lap();

  for (const auto& [k, v] : nn::config_to_map(model)) o.manifest.config["model." + k] = v;
  for (const auto& [k, v] : nn::train_config_to_map(train)) o.manifest.config["train." + k] = v;
  o.manifest.inputs["data_dir"] = a.data_dir;
  o.manifest.results["samples"] = std::to_string(data.size());
  o.manifest.results["final_loss"] = result.losses.empty() ? "nan" : num(result.losses.back());
  o.manifest.results["final_epe"] = num(final_epe);
  o.manifest.outputs["params"] = a.out_params;
  o.manifest.outputs["config"] = cfg_path;
  o.manifest.outputs["losses"] = loss_path;
  out << "trained " << train.iterations << " iterations on " << data.size() << " sample(s); final-flow EPE "
      << fixed(final_epe, 4) << " px\n";
  o.manifest_path = a.out_params + ".manifest.txt";
  return o;
}

// ---- infer ------------------------------------------------------------------

struct InferArgs {
  std::string grid;
  std::string params;
  std::string config;
  std::string out_dir;
  bool render = false;
};

Outcome run_infer(const InferArgs& a, std::ostream& out) {
  require_file("--grid", a.grid);
  require_file("--params", a.params);
  const std::string cfg = a.config.empty() ? a.params + ".cfg" : a.config;
  require_file("--config", cfg);
  Stopwatch clock;
  Outcome o;
  const Grid grid = load_grid(a.grid);
  const nn::ModelConfig model = nn::config_from_map(read_key_values(cfg));
  const nn::ModelParams<float> params = nn::load_params(a.params);
  o.manifest.timings_s["load"] = clock.lap();
  const FlowSequence seq = nn::model_forward(grid, model, params);
  o.manifest.timings_s["forward"] = clock.lap();
  ensure_dir(a.out_dir);
  for (int j = 1; j <= seq.steps(); ++j) {
    const std::string path = (fs::path(a.out_dir) / indexed_name("flow", j, ".evaf")).string();
    save_flow(seq.at(j), path);
    o.manifest.outputs[indexed_name("flow", j, "")] = path;
    if (a.render) render_flow_image(seq.at(j), (fs::path(a.out_dir) / indexed_name("flow", j, ".ppm")).string());
  }
  o.manifest.timings_s["save"] = clock.lap();
  for (const auto& [k, v] : nn::config_to_map(model)) o.manifest.config["model." + k] = v;
  o.manifest.results["outputs"] = std::to_string(seq.steps());
  o.manifest.results["spacing_s"] = num(seq.tau_s);
  out << "wrote " << seq.steps() << " flow fields at " << fixed(seq.tau_s * 1e3, 3) << " ms spacing ("
      << fixed(1.0 / seq.tau_s, 1) << " Hz) to " << a.out_dir << "\n";
  o.manifest_path = (fs::path(a.out_dir) / "manifest.txt").string();
  return o;
}

// ---- trajectory -------------------------------------------------------------

struct TrajectoryArgs {
  std::string flows_dir;
  std::vector<std::string> seeds;
  double t0 = 0.0;
  std::string out;
};

FlowSequence load_sequence(const std::string& dir, double t0) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto& p = entry.path();
    if (p.extension() == ".evaf" && p.stem().string().rfind("flow_", 0) == 0) files.push_back(p);
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw data_error("--flows-dir: no flow_*.evaf files in '" + dir + "'");
  FlowSequence seq;
  seq.t0_s = t0;
  for (const auto& f : files) seq.flows.push_back(load_flow(f.string()));
  seq.tau_s = seq.flows.front().duration_s;
  validate_sequence(seq);
  return seq;
}

Outcome run_trajectory(const TrajectoryArgs& a, std::ostream& out) {
  require_dir("--flows-dir", a.flows_dir);
  if (a.seeds.empty()) throw invalid_argument("--seeds: at least one x,y seed is required");
  std::vector<Point2> seeds;
  for (const auto& s : a.seeds) seeds.push_back(parse_point(s));
  Stopwatch clock;
  Outcome o;
  const FlowSequence seq = load_sequence(a.flows_dir, a.t0);
  o.manifest.timings_s["load"] = clock.lap();
  const auto tracks = integrate_trajectory(seq, seeds);
  std::ofstream f(a.out, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error("--out: cannot open '" + a.out + "' for writing");
  f << "seed,step,t_s,x,y,in_bounds\n";
  for (std::size_t k = 0; k < tracks.size(); ++k)
    for (const TrajectoryPoint& p : tracks[k])
      f << k << "," << p.step << "," << num(p.t_s) << "," << num(p.x) << "," << num(p.y) << "," << (p.in_bounds ? 1 : 0)
        << "\n";
  if (!f) throw io_error("--out: write failed for '" + a.out + "'");
  o.manifest.timings_s["integrate"] = clock.lap();
  o.manifest.inputs["flows_dir"] = a.flows_dir;
  o.manifest.outputs["trajectory"] = a.out;
  o.manifest.results["seeds"] = std::to_string(seeds.size());
  o.manifest.results["steps"] = std::to_string(seq.steps());
  out << "integrated " << seeds.size() << " seed(s) over " << seq.steps() << " steps into " << a.out << "\n";
  o.manifest_path = a.out + ".manifest.txt";
  return o;
}

// ---- report -----------------------------------------------------------------

struct ReportArgs {
  std::string dir;
  std::string out;
};

Outcome run_report(const ReportArgs& a, std::ostream& out) {
  require_dir("--dir", a.dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(a.dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  Stopwatch clock;
  Outcome o;
  std::ostringstream table;
  table << "source," << kMetricsHeader << "\n";
  std::vector<EvalReport> rows;
  for (const auto& path : files) {
    std::ifstream f(path);
    std::string line;
    if (!std::getline(f, line) || line != kMetricsHeader) continue;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      rows.push_back(parse_metrics_row(line));
      table << fs::relative(path, a.dir).generic_string() << "," << format_metrics_row(rows.back()) << "\n";
    }
  }
  if (rows.empty()) throw data_error("--dir: no metrics rows under '" + a.dir + "'");
  table << "all," << format_metrics_row(merge_reports(rows)) << "\n";
  o.manifest.timings_s["aggregate"] = clock.lap();
  out << table.str();
  o.manifest.inputs["dir"] = a.dir;
  o.manifest.results["rows"] = std::to_string(rows.size());
  if (!a.out.empty()) {
    std::ofstream f(a.out, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("--out: cannot open '" + a.out + "' for writing");
    f << table.str();
    o.manifest.outputs["table"] = a.out;
    o.manifest_path = a.out + ".manifest.txt";
  }
  return o;
}

// ---- render -----------------------------------------------------------------

struct RenderArgs {
  std::string flow;
  std::string out;
  double max_magnitude = 0.0;
};

Outcome run_render(const RenderArgs& a, std::ostream& out) {
  require_file("--flow", a.flow);
  Stopwatch clock;
  Outcome o;
  render_flow_image(load_flow(a.flow), a.out, a.max_magnitude);
  o.manifest.timings_s["render"] = clock.lap();
  o.manifest.outputs["image"] = a.out;
  out << "wrote " << a.out << "\n";
  o.manifest_path = a.out + ".manifest.txt";
  return o;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return kUsage;
    case ErrorKind::kNumeric: return kNumericError;
    default: return kDataError;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Anytime event-camera optical flow toolkit", "evaflow"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version());
  std::string manifest_override;
  app.add_option("--manifest", manifest_override, "Manifest path (default derived from the primary output)");

  std::function<Outcome()> action;
  std::map<std::string, std::string> flags;

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Synthetic events with analytic ground-truth flow");
  s->add_option("--motion", sim.motion, "const or arc")->check(CLI::IsMember({"const", "arc"}));
  s->add_option("--speed", sim.speed, "px/s for const, rad/s for arc");
  s->add_option("--speed-jitter", sim.speed_jitter, "Relative per-sample speed spread");
  s->add_option("--direction", sim.direction_deg, "Direction in degrees (const; default random per sample)");
  s->add_flag("--random-sign", sim.random_sign, "Random rotation sense per sample (arc)");
  s->add_option("--center-jitter", sim.center_jitter, "Rotation-center spread in px (arc)");
  s->add_option("--duration", sim.duration, "Window length in seconds");
  s->add_option("--rate", sim.rate, "Events per pixel of travel");
  s->add_option("--seed", sim.seed);
  s->add_option("--samples", sim.samples);
  s->add_option("--points", sim.points, "Scene points per sample");
  s->add_option("--margin", sim.margin);
  s->add_option("--noise", sim.noise, "Background events per second per pixel");
  s->add_option("--width", sim.width);
  s->add_option("--height", sim.height);
  s->add_option("--out", sim.out, "Output directory")->required();
  s->callback([&] { action = [&] { return run_simulate(sim, out); }; });

  VoxelizeArgs vox;
  auto* v = app.add_subcommand("voxelize", "Batch voxel grid construction");
  v->add_option("--in", vox.in)->required();
  v->add_option("--bins", vox.bins);
  v->add_option("--tau", vox.tau, "Bin spacing in seconds (default: window span / (bins-1))");
  v->add_option("--kind", vox.kind, "uvg or vg")->check(CLI::IsMember({"uvg", "vg"}));
  v->add_option("--out", vox.out)->required();
  v->callback([&] { action = [&] { return run_voxelize(vox, out); }; });

  VoxelizeArgs str;
  auto* st = app.add_subcommand("stream", "Bin-by-bin UVG construction");
  st->add_option("--in", str.in)->required();
  st->add_option("--bins", str.bins);
  st->add_option("--tau", str.tau, "Bin spacing in seconds (default: window span / (bins-1))");
  st->add_option("--out", str.out)->required();
  st->callback([&] { action = [&] { return run_stream(str, out); }; });

  MocompArgs mc;
  auto* m = app.add_subcommand("mocomp", "Motion compensation with FWL / RFWL");
  m->add_option("--events", mc.events)->required();
  m->add_option("--flow", mc.flow)->required();
  m->add_option("--tref", mc.tref, "Reference time in seconds (default: window start)");
  m->add_option("--out-prefix", mc.out_prefix)->required();
  m->callback([&] { action = [&] { return run_mocomp(mc, out); }; });

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Supervised flow metrics");
  e->add_option("--pred", ev.pred)->required();
  e->add_option("--gt", ev.gt)->required();
  e->add_option("--ae-convention", ev.ae_convention, "3d or 2d")->check(CLI::IsMember({"3d", "2d"}));
  e->add_option("--outlier-convention", ev.outlier_convention, "relative or absolute")
      ->check(CLI::IsMember({"relative", "absolute"}));
  e->add_option("--out", ev.out, "Also write the metrics table here");
  e->callback([&] { action = [&] { return run_eval(ev, out); }; });

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train the toy model");
  t->add_option("--data-dir", tr.data_dir)->required();
  t->add_option("--config", tr.config, "key=value file with model and training settings");
  t->add_option("--seed", tr.seed);
  t->add_option("--iterations", tr.iterations);
  t->add_option("--log-every", tr.log_every);
  t->add_option("--out-params", tr.out_params)->required();
  t->callback([&] { action = [&] { return run_train(tr, out); }; });

  InferArgs in;
  auto* i = app.add_subcommand("infer", "Time-dense flow from a UVG grid");
  i->add_option("--grid", in.grid)->required();
  i->add_option("--params", in.params)->required();
  i->add_option("--config", in.config, "Model config (default: <params>.cfg)");
  i->add_option("--out-dir", in.out_dir)->required();
  i->add_flag("--render", in.render, "Also write color-wheel PPM images");
  i->callback([&] { action = [&] { return run_infer(in, out); }; });

  TrajectoryArgs tj;
  auto* j = app.add_subcommand("trajectory", "Integrate point trajectories from a flow sequence");
  j->add_option("--flows-dir", tj.flows_dir)->required();
  j->add_option("--seeds", tj.seeds, "Seed points as x,y")->required();
  j->add_option("--t0", tj.t0, "Window start in seconds");
  j->add_option("--out", tj.out)->required();
  j->callback([&] { action = [&] { return run_trajectory(tj, out); }; });

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "Aggregate metrics tables");
  r->add_option("--dir", rp.dir)->required();
  r->add_option("--out", rp.out);
  r->callback([&] { action = [&] { return run_report(rp, out); }; });

  RenderArgs rd;
  auto* rr = app.add_subcommand("render", "Color-wheel image of a flow field");
  rr->add_option("--flow", rd.flow)->required();
  rr->add_option("--out", rd.out)->required();
  rr->add_option("--max", rd.max_magnitude, "Magnitude mapped to full saturation (default: auto)");
  rr->callback([&] { action = [&] { return run_render(rd, out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex, out, err);
    return kUsage;
  }

  try {
    Outcome o = action();
    CLI::App* sub = app.get_subcommands().front();
    o.manifest.command = sub->get_name();
    for (const CLI::Option* opt : sub->get_options()) {
      if (opt->get_name() == "--help" || opt->count() == 0) continue;
      const auto results = opt->results();
      std::string joined;
      for (std::size_t k = 0; k < results.size(); ++k) joined += (k ? " " : "") + results[k];
      std::string name = opt->get_name();
      name.erase(0, name.find_first_not_of('-'));
      o.manifest.config[name] = opt->get_expected_min() == 0 ? "1" : joined;
    }
    const std::string path = manifest_override.empty() ? o.manifest_path : manifest_override;
    if (path.empty()) err << o.manifest.to_text();
    else o.manifest.write(path);
    return kOk;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return exit_code_for(ex.kind());
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kDataError;
  }
}

}  // namespace evaflow::cli
