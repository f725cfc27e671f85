// Command-line driver: synth, splat, resample, pipeline, simulate, eval.

#include "splatsim/evaluate.hpp"
#include "splatsim/lidar.hpp"
#include "splatsim/parallel.hpp"
#include "splatsim/resample.hpp"
#include "splatsim/synth.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

using namespace splatsim;
namespace fs = std::filesystem;

namespace {

// Name of the step in progress, reported on failure.
std::string g_stage = "startup";

struct Globals {
  unsigned threads = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

struct CloudInput {
  std::string path;
  std::string labels;  // label file for KITTI .bin clouds
};

PointCloud load_input(const CloudInput& in) {
  g_stage = "load";
  std::optional<fs::path> labels;
  if (!in.labels.empty()) labels = in.labels;
  const PointCloud cloud = load_cloud(in.path, format_from_path(in.path), labels);
  if (cloud.empty()) throw InvalidArgument("'" + in.path + "' holds no points");
  return cloud;
}

Vec3 to_vec3(const std::vector<double>& v) { return Vec3(v[0], v[1], v[2]); }

void write_timings(const std::string& path, const std::vector<std::pair<std::string, double>>& timings) {
  if (path.empty()) return;
  EvalReport r;
  r.timings = timings;
  write_text(path, timings_csv(r));
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string scene;
  std::string output;
  std::string mapping_out;
  std::optional<std::size_t> count;
  std::optional<double> extent;
  std::optional<double> noise;
  std::size_t lines = synth::ScanlineOptions{}.lines;
  double spacing_growth = synth::ScanlineOptions{}.spacing_growth;
  double spike_fraction = synth::ScanlineOptions{}.spike_fraction;
  bool ascii = false;
};

void write_mapping(const GroupMapping& m, const fs::path& path) {
  std::ostringstream out;
  out << "# class group [dynamic]\n";
  for (const auto& [id, group] : m.groups)
    out << id << ' ' << to_string(group) << (m.dynamic_classes.count(id) ? " dynamic" : "") << '\n';
  write_text(path, out.str());
}

void run_synth(const SynthArgs& a, const Globals& g) {
  g_stage = "synth";
  PointCloud cloud;
  if (a.scene == "plane") {
    synth::PlaneOptions o;
    if (a.count) o.count = *a.count;
    if (a.extent) o.extent = *a.extent;
    if (a.noise) o.noise_sigma = *a.noise;
    if (g.seed_set) o.seed = g.seed;
    cloud = synth::plane(o);
  } else if (a.scene == "dihedral") {
    synth::DihedralOptions o;
    if (a.count) o.count_per_face = *a.count;
    if (a.extent) o.extent = *a.extent;
    if (a.noise) o.noise_sigma = *a.noise;
    if (g.seed_set) o.seed = g.seed;
    cloud = synth::dihedral(o);
  } else if (a.scene == "pole") {
    synth::PoleOptions o;
    if (a.count) o.ground_count = *a.count;
    if (a.extent) o.ground_extent = *a.extent;
    if (a.noise) o.noise_sigma = *a.noise;
    if (g.seed_set) o.seed = g.seed;
    cloud = synth::pole(o);
  } else {
    synth::ScanlineOptions o;
    o.lines = a.lines;
    o.spacing_growth = a.spacing_growth;
    o.spike_fraction = a.spike_fraction;
    if (a.extent) o.length = *a.extent;
    if (a.noise) o.noise_sigma = *a.noise;
    if (g.seed_set) o.seed = g.seed;
    cloud = synth::scanlines(o);
  }
  g_stage = "save";
  save_cloud(cloud, a.output, a.ascii ? PlyEncoding::Ascii : PlyEncoding::Binary);
  if (!a.mapping_out.empty()) write_mapping(synth::mapping_for(a.scene), a.mapping_out);
  std::cerr << a.scene << ": " << cloud.size() << " points -> " << a.output << '\n';
}

// ------------------------------------------------- splat / resample / pipeline

struct GenArgs {
  CloudInput input;
  std::string output;
  std::string mapping;
  std::string timings;
  std::string variant = "descr";
  double alpha = 0.2;
  double beta = 0.6;
  std::size_t k = kDefaultK;
  bool denoise = true;
  std::size_t max_per_splat = kMaxResamplePerSplat;
  std::string fallback = "up";
  std::vector<double> viewpoint{0, 0, 0};
  double dynamic_radius = kDynamicSplatRadius;
  bool ascii = false;
};

PipelineConfig pipeline_config(const GenArgs& a, bool resample) {
  g_stage = "config";
  PipelineConfig cfg;
  const auto v = parse_variant(a.variant);
  if (!v) throw ConfigError("unknown variant '" + a.variant + "' (basic, semantic, descr)");
  cfg.variant = *v;
  cfg.alpha = a.alpha;
  cfg.beta = a.beta;
  cfg.k = a.k;
  cfg.denoise = a.denoise;
  cfg.resample = resample;
  cfg.max_resample_per_splat = a.max_per_splat;
  if (a.fallback == "up")
    cfg.normals.fallback = OrientationFallback::UpZ;
  else if (a.fallback == "viewpoint")
    cfg.normals.fallback = OrientationFallback::Viewpoint;
  else if (a.fallback == "none")
    cfg.normals.fallback = OrientationFallback::None;
  else
    throw ConfigError("unknown normal fallback '" + a.fallback + "' (up, viewpoint, none)");
  cfg.normals.viewpoint = to_vec3(a.viewpoint);
  if (cfg.k < 3) throw ConfigError("k must be at least 3");
  if (cfg.variant == Variant::AdaSemantic && a.mapping.empty())
    throw ConfigError("the semantic variant needs --mapping");
  return cfg;
}

// Applies the group mapping when one is given; returns the static cloud and
// per-frame dynamic points.
SemanticPartition partition(const PointCloud& cloud, const GenArgs& a) {
  if (a.mapping.empty()) return {cloud, {}};
  g_stage = "mapping";
  return map_semantic_groups(cloud, GroupMapping::load(a.mapping));
}

SplatSet with_dynamic(SplatSet set, const SemanticPartition& part, double radius) {
  if (part.dynamic_frames.empty()) return set;
  g_stage = "dynamic";
  SplatSet merged = merge_splats(set, splat_dynamic_frames(part.dynamic_frames, radius));
  merged.metadata = set.metadata;
  return merged;
}

void annotate(SplatSet& set, const PipelineConfig& cfg, const ScaleStats& stats) {
  char buf[64];
  set.metadata["variant"] = std::string(to_string(cfg.variant));
  std::snprintf(buf, sizeof(buf), "%.17g", cfg.alpha);
  set.metadata["alpha"] = buf;
  std::snprintf(buf, sizeof(buf), "%.17g", cfg.beta);
  set.metadata["beta"] = buf;
  set.metadata["k"] = std::to_string(cfg.k);
  std::snprintf(buf, sizeof(buf), "%.17g", stats.r_bar);
  set.metadata["r_bar"] = buf;
  std::snprintf(buf, sizeof(buf), "%.17g", stats.e_bar);
  set.metadata["e_bar"] = buf;
  set.metadata["stats_after_denoise"] = cfg.denoise ? "yes" : "no";
}

void run_generation(const GenArgs& a, bool resample) {
  const PipelineConfig cfg = pipeline_config(a, resample);
  const PointCloud cloud = load_input(a.input);
  const SemanticPartition part = partition(cloud, a);
  g_stage = resample ? "pipeline" : "splat";
  PipelineResult r = run_adaptive_pipeline(part.static_cloud, cfg);
  annotate(r.splats, cfg, r.final_stats);
  const SplatSet out = with_dynamic(std::move(r.splats), part, a.dynamic_radius);
  g_stage = "save";
  save_splats(out, a.output);
  write_timings(a.timings, r.timings);
  std::cerr << cloud.size() << " points -> " << out.size() << " splats";
  if (resample) std::cerr << " (" << r.resampled_points << " points added by resampling)";
  std::cerr << " -> " << a.output << '\n';
}

void run_resample(const GenArgs& a) {
  const PipelineConfig cfg = pipeline_config(a, true);
  const PointCloud cloud = load_input(a.input);
  const SemanticPartition part = partition(cloud, a);
  g_stage = "resample";
  const ResampleResult r = resample_stage(part.static_cloud, cfg);
  g_stage = "save";
  save_cloud(r.cloud, a.output, a.ascii ? PlyEncoding::Ascii : PlyEncoding::Binary);
  write_timings(a.timings, r.timings);
  std::cerr << cloud.size() << " points -> " << r.cloud.size() << " points (" << r.added_points << " added, "
            << part.static_cloud.size() - r.denoised_points << " removed as noise) -> " << a.output << '\n';
}

// ---------------------------------------------------------------- simulate

struct SimArgs {
  std::string splats;
  std::string output;
  std::string sensor = "hdl32";
  std::string sensor_config;
  std::string trajectory;
  std::vector<double> pose{0, 0, 2};
  double pitch = 0;
  std::optional<double> noise;
  bool multi_depth = false;
  std::size_t depth = 5;
  double dist_threshold = 0.10;
  bool brute_force = false;
  std::string timings;
  bool ascii = false;
};

void run_simulate(const SimArgs& a, const Globals& g) {
  g_stage = "config";
  SensorModel model = a.sensor_config.empty() ? sensor_preset(a.sensor) : load_sensor_model(a.sensor_config);
  if (a.noise) model.noise_sigma = *a.noise;
  model.validate();
  if (a.depth < 1) throw ConfigError("--depth must be at least 1");
  if (!(a.dist_threshold >= 0)) throw ConfigError("--dist-threshold must be non-negative");
  std::vector<Pose> poses;
  if (!a.trajectory.empty()) {
    g_stage = "trajectory";
    poses = load_trajectory(a.trajectory);
  } else {
    Pose p;
    p.position = to_vec3(a.pose);
    p.initial_pitch = a.pitch;
    poses.push_back(p);
  }
  if (poses.empty()) throw InvalidArgument("the trajectory holds no poses");

  g_stage = "load";
  const SplatSet set = load_splats(a.splats);
  std::vector<std::pair<std::string, double>> timings;
  auto start = std::chrono::steady_clock::now();
  g_stage = "bvh";
  const Bvh bvh = build_bvh(set);
  timings.emplace_back("bvh", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());

  SimulationOptions opts;
  opts.multi_depth = a.multi_depth;
  opts.depth = a.depth;
  opts.dist_threshold = a.dist_threshold;
  opts.seed = g.seed;
  opts.brute_force = a.brute_force;
  g_stage = "simulate";
  start = std::chrono::steady_clock::now();
  const TrajectoryResult result = simulate_trajectory(bvh, set, model, poses, opts);
  timings.emplace_back("simulate", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());

  g_stage = "save";
  const fs::path dir(a.output);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  const bool labels = all_labeled(set);
  const PlyEncoding enc = a.ascii ? PlyEncoding::Ascii : PlyEncoding::Binary;
  for (const Scan& scan : result.scans) {
    char name[32];
    std::snprintf(name, sizeof(name), "scan_%06u.ply", static_cast<unsigned>(scan.pose.frame));
    save_cloud(scan_to_cloud(scan, labels), dir / name, enc);
  }
  save_cloud(result.accumulated, dir / "accumulated.ply", enc);
  save_trajectory(poses, dir / "trajectory.txt");
  write_timings(a.timings, timings);
  std::cerr << result.scans.size() << " scans, " << result.accumulated.size() << " returns -> " << dir.string()
            << '\n';
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  CloudInput sim;
  CloudInput ori;
  std::vector<ClassId> classes;
  std::vector<double> plane;
  std::optional<double> density_radius;
  std::string splats;
  double coverage_tolerance = 0.02;
  std::string output;
  std::string timings;
};

void run_eval(const EvalArgs& a) {
  using clock = std::chrono::steady_clock;
  EvalReport report;
  auto timed = [&](const char* stage, auto&& fn) {
    g_stage = stage;
    const auto start = clock::now();
    fn();
    report.timings.emplace_back(stage, std::chrono::duration<double>(clock::now() - start).count());
  };
  g_stage = "config";
  if (!a.plane.empty() && Vec3(a.plane[0], a.plane[1], a.plane[2]).norm() == 0)
    throw ConfigError("--plane normal must be nonzero");
  if (a.density_radius && !(*a.density_radius > 0)) throw ConfigError("--density-radius must be positive");

  PointCloud sim, ori;
  timed("load", [&] {
    sim = load_input(a.sim);
    ori = load_input(a.ori);
  });
  report.sim_points = sim.size();
  report.ori_points = ori.size();
  timed("c2c", [&] { report.c2c = c2c_distance(sim, ori); });
  if (!a.plane.empty()) {
    timed("c2c_plane", [&] {
      const Vec3 n(a.plane[0], a.plane[1], a.plane[2]);
      report.c2c_plane = c2c_to_plane(sim, Eigen::Hyperplane<double, 3>(n / n.norm(), a.plane[3] / n.norm()));
    });
  }
  if (!a.classes.empty()) timed("c2c_class", [&] { report.per_class = c2c_per_class(sim, ori, a.classes); });
  if (a.density_radius) timed("density", [&] { report.density = density_stats(sim, *a.density_radius); });
  if (!a.splats.empty()) {
    timed("coverage", [&] {
      const SplatSet set = load_splats(a.splats);
      report.coverage = coverage_fraction(set, ori, a.coverage_tolerance);
      report.primitives = set.size();
    });
  }
  g_stage = "save";
  if (!a.output.empty()) write_text(a.output, report_csv(report));
  if (!a.timings.empty()) write_text(a.timings, timings_csv(report));
  std::cout << report_summary(report);
}

std::string quoted(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c == '\n' ? ' ' : c);
  }
  return out;
}

int fail(std::string_view kind, std::string_view message) {
  std::fprintf(stderr, "error: stage=%s kind=%.*s message=\"%s\"\n", g_stage.c_str(), static_cast<int>(kind.size()),
               kind.data(), quoted(message).c_str());
  return 1;
}

void add_cloud_input(CLI::App* cmd, CloudInput& in) {
  cmd->add_option("input", in.path, "Input cloud (.ply or KITTI .bin)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--labels", in.labels, "SemanticKITTI .label file for a .bin input")->check(CLI::ExistingFile);
}

void add_gen_options(CLI::App* cmd, GenArgs& a, bool splat_output) {
  add_cloud_input(cmd, a.input);
  cmd->add_option("-o,--output", a.output, splat_output ? "Output splat file" : "Output PLY cloud")->required();
  cmd->add_option("--variant", a.variant, "basic, semantic or descr")
      ->check(CLI::IsMember({"basic", "semantic", "adasemantic", "descr", "adadescr"}));
  cmd->add_option("--mapping", a.mapping, "Class-to-group mapping file (`class group [dynamic]` per line)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--alpha", a.alpha, "Seed discard factor")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--beta", a.beta, "Smoothness threshold on normal dot products")->check(CLI::Range(-1.0, 1.0));
  cmd->add_option("-k,--neighbors", a.k, "Neighborhood size K");
  cmd->add_option("--normal-fallback", a.fallback, "Orientation for points without a sensor position")
      ->check(CLI::IsMember({"up", "viewpoint", "none"}));
  cmd->add_option("--viewpoint", a.viewpoint, "Viewpoint x,y,z for --normal-fallback viewpoint")
      ->delimiter(',')
      ->expected(3);
  cmd->add_option("--timings", a.timings, "Write per-stage timings CSV here");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive splat modeling and LiDAR simulation over point clouds"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "INI config file; explicit flags take precedence");
  app.footer(
      "Environment:\n  SPLATSIM_THREADS  worker cap when --threads is not given (0 = all cores)\n"
      "Errors are reported on stderr as: error: stage=<step> kind=<kind> message=\"...\"");

  Globals g;
  app.add_option("--threads", g.threads, "Worker threads for parallel stages (0 = all cores)")
      ->envname("SPLATSIM_THREADS");
  auto* seed_opt = app.add_option("--seed", g.seed, "Seed for stochastic stages (range noise, synthetic scenes)");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Write a built-in synthetic scene");
  synth_cmd->add_option("scene", synth_args.scene, "plane, dihedral, pole or scanlines")
      ->required()
      ->check(CLI::IsMember({"plane", "dihedral", "pole", "scanlines"}));
  synth_cmd->add_option("-o,--output", synth_args.output, "Output PLY cloud")->required();
  synth_cmd->add_option("--mapping-out", synth_args.mapping_out, "Also write the scene's group mapping here");
  synth_cmd->add_option("--count", synth_args.count,
                        "Points (plane), points per face (dihedral) or ground points (pole); scene default if unset");
  synth_cmd->add_option("--extent", synth_args.extent, "Patch side or line length in meters; scene default if unset");
  synth_cmd->add_option("--noise", synth_args.noise, "Gaussian surface noise sigma in meters; scene default if unset");
  synth_cmd->add_option("--lines", synth_args.lines, "scanlines: number of sweep lines");
  synth_cmd->add_option("--spacing-growth", synth_args.spacing_growth, "scanlines: line gap multiplier per line");
  synth_cmd->add_option("--spike-fraction", synth_args.spike_fraction, "scanlines: share of off-surface spikes");
  synth_cmd->add_flag("--ascii", synth_args.ascii, "Write ASCII PLY");

  GenArgs splat_args;
  splat_args.denoise = false;
  auto* splat_cmd = app.add_subcommand("splat", "Generate splats once, without resampling");
  add_gen_options(splat_cmd, splat_args, true);
  splat_cmd->add_flag("--denoise,!--no-denoise", splat_args.denoise, "Remove outliers before generation");
  splat_cmd->add_option("--dynamic-radius", splat_args.dynamic_radius, "Radius of splats on dynamic points");

  GenArgs resample_args;
  auto* resample_cmd = app.add_subcommand("resample", "Denoise, splat and write the resampled cloud");
  add_gen_options(resample_cmd, resample_args, false);
  resample_cmd->add_flag("--denoise,!--no-denoise", resample_args.denoise, "Remove outliers before generation");
  resample_cmd->add_option("--max-per-splat", resample_args.max_per_splat, "Cap on new points per sparse splat");
  resample_cmd->add_flag("--ascii", resample_args.ascii, "Write ASCII PLY");

  GenArgs pipe_args;
  auto* pipe_cmd = app.add_subcommand("pipeline", "Denoise, splat, resample and splat again");
  add_gen_options(pipe_cmd, pipe_args, true);
  pipe_cmd->add_flag("--denoise,!--no-denoise", pipe_args.denoise, "Remove outliers before generation");
  pipe_cmd->add_option("--max-per-splat", pipe_args.max_per_splat, "Cap on new points per sparse splat");
  pipe_cmd->add_option("--dynamic-radius", pipe_args.dynamic_radius, "Radius of splats on dynamic points");
  bool pipe_no_resample = false;
  pipe_cmd->add_flag("--no-resample", pipe_no_resample, "Skip the resampling round");

  SimArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Cast LiDAR revolutions against a splat file");
  sim_cmd->add_option("splats", sim_args.splats, "Input splat file")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("-o,--output", sim_args.output, "Output directory (scan_NNNNNN.ply, accumulated.ply)")
      ->required();
  sim_cmd->add_option("--sensor", sim_args.sensor, "Sensor preset")->check(CLI::IsMember({"hdl32", "hdl64"}));
  sim_cmd->add_option("--sensor-config", sim_args.sensor_config, "Sensor model file (`key = value` lines)")
      ->check(CLI::ExistingFile);
  auto* traj_opt = sim_cmd->add_option("--trajectory", sim_args.trajectory, "Poses file (`frame x y z [pitch]` lines)")
                       ->check(CLI::ExistingFile);
  sim_cmd->add_option("--pose", sim_args.pose, "Single sensor position x,y,z")
      ->delimiter(',')
      ->expected(3)
      ->excludes(traj_opt);
  sim_cmd->add_option("--pitch", sim_args.pitch, "Initial pitch of the single pose, degrees")->excludes(traj_opt);
  sim_cmd->add_option("--noise", sim_args.noise, "Range noise sigma in meters (overrides the sensor model)");
  sim_cmd->add_flag("--multi-depth", sim_args.multi_depth, "Weighted multi-depth returns");
  sim_cmd->add_option("--depth", sim_args.depth, "Max hits averaged per multi-depth return");
  sim_cmd->add_option("--dist-threshold", sim_args.dist_threshold, "Max gap between averaged hits, meters");
  sim_cmd->add_flag("--brute-force", sim_args.brute_force, "Intersect every splat instead of using the BVH");
  sim_cmd->add_option("--timings", sim_args.timings, "Write per-stage timings CSV here");
  sim_cmd->add_flag("--ascii", sim_args.ascii, "Write ASCII PLY");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Compare a simulated cloud with the original");
  eval_cmd->add_option("--sim", eval_args.sim.path, "Simulated cloud")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--ori", eval_args.ori.path, "Original cloud")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--sim-labels", eval_args.sim.labels, "Label file for a .bin simulated cloud")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--ori-labels", eval_args.ori.labels, "Label file for a .bin original cloud")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--classes", eval_args.classes, "Class ids for per-class C2C, comma separated")
      ->delimiter(',');
  eval_cmd->add_option("--plane", eval_args.plane, "Analytic plane a,b,c,d (ax+by+cz+d=0) for C2C to plane")
      ->delimiter(',')
      ->expected(4);
  eval_cmd->add_option("--density-radius", eval_args.density_radius, "Radius for local density statistics");
  eval_cmd->add_option("--splats", eval_args.splats, "Splat file: report coverage of --ori and primitive count")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--coverage-tolerance", eval_args.coverage_tolerance, "Plane distance tolerance for coverage");
  eval_cmd->add_option("-o,--output", eval_args.output, "Write `metric,class,value,count` CSV here");
  eval_cmd->add_option("--timings", eval_args.timings, "Write `stage,seconds` CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    set_thread_count(g.threads);
    if (*synth_cmd) run_synth(synth_args, g);
    if (*splat_cmd) run_generation(splat_args, false);
    if (*resample_cmd) run_resample(resample_args);
    if (*pipe_cmd) run_generation(pipe_args, !pipe_no_resample);
    if (*sim_cmd) run_simulate(sim_args, g);
    if (*eval_cmd) run_eval(eval_args);
  } catch (const Error& e) {
    return fail(e.kind(), e.what());
  } catch (const std::bad_alloc&) {
    return fail("resource", "out of memory");
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
