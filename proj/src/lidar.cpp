#include "splatsim/lidar.hpp"

#include "splatsim/parallel.hpp"

#include <Eigen/Geometry>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>

namespace splatsim {

namespace {

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& text, const std::string& what) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("bad number '" + text + "' for " + what);
  return v;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

bool same_class(const Splat& a, const Splat& b) {
  if (a.label && b.label) return *a.label == *b.label;
  return a.group == b.group;
}

}  // namespace

void SensorModel::validate() const {
  if (beams < 1) throw ConfigError("sensor needs at least one beam");
  if (pulses_per_rev < 1) throw ConfigError("sensor needs at least one pulse per revolution");
  if (!(azimuth_step > 0)) throw ConfigError("azimuth step must be positive");
  // Last azimuth must stay below a full turn.
  if (azimuth_step * (pulses_per_rev - 1) >= 360.0)
    throw ConfigError("azimuth ladder exceeds one revolution");
  if (!(elevation_step >= 0)) throw ConfigError("elevation step must be non-negative");
  if (!(elevation_max >= elevation_min)) throw ConfigError("elevation_max below elevation_min");
  if (!(range_max > 0)) throw ConfigError("range_max must be positive");
  if (!(noise_sigma >= 0)) throw ConfigError("noise sigma must be non-negative");
}

SensorModel sensor_preset(std::string_view name) {
  SensorModel m;
  if (name == "hdl32") {
    m = {"hdl32", 32, 0.2, -30.67, 10.67, 1.33, 1800, 100.0, 0.0};
  } else if (name == "hdl64") {
    m = {"hdl64", 64, 0.16, -24.8, 2.0, 0.419, 2250, 120.0, 0.0};
  } else {
    throw ConfigError("unknown sensor preset '" + std::string(name) + "'");
  }
  return m;
}

SensorModel parse_sensor_model(std::string_view text) {
  SensorModel m = sensor_preset("hdl32");
  m.name = "custom";
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("sensor config line lacks '=': " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "preset") {
      m = sensor_preset(value);
    } else if (key == "name") {
      m.name = value;
    } else if (key == "beams") {
      m.beams = static_cast<int>(to_double(value, key));
    } else if (key == "azimuth_step") {
      m.azimuth_step = to_double(value, key);
    } else if (key == "elevation_min") {
      m.elevation_min = to_double(value, key);
    } else if (key == "elevation_max") {
      m.elevation_max = to_double(value, key);
    } else if (key == "elevation_step") {
      m.elevation_step = to_double(value, key);
    } else if (key == "pulses_per_rev") {
      m.pulses_per_rev = static_cast<int>(to_double(value, key));
    } else if (key == "range_max") {
      m.range_max = to_double(value, key);
    } else if (key == "noise_sigma") {
      m.noise_sigma = to_double(value, key);
    } else {
      throw ConfigError("unknown sensor config key '" + key + "'");
    }
  }
  m.validate();
  return m;
}

SensorModel load_sensor_model(const std::filesystem::path& path) { return parse_sensor_model(read_text(path)); }

Vec3 ray_direction(double azimuth_deg, double elevation_deg, double initial_pitch_deg) {
  using Eigen::AngleAxisd;
  // A right-handed rotation about +y tilts +x downward, hence the negated angles.
  const Vec3 pitched = AngleAxisd(-radians(initial_pitch_deg), Vec3::UnitY()) * Vec3::UnitX();
  return AngleAxisd(radians(azimuth_deg), Vec3::UnitZ()) *
         (AngleAxisd(-radians(elevation_deg), Vec3::UnitY()) * pitched);
}

std::vector<Ray> generate_revolution_rays(const SensorModel& model, const Pose& pose) {
  model.validate();
  std::vector<Ray> rays;
  rays.reserve(model.rays_per_revolution());
  for (int i = 0; i < model.pulses_per_rev; ++i) {
    for (int j = 0; j < model.beams; ++j) {
      rays.push_back({pose.position, ray_direction(model.azimuth(i), model.elevation(j), pose.initial_pitch),
                      model.range_max});
    }
  }
  return rays;
}

double depth_weight(std::size_t d, std::size_t depth) {
  const double half = static_cast<double>(depth) / 2.0;
  return std::exp(-std::abs(static_cast<double>(d) - half) / half);
}

std::optional<WeightedReturn> weighted_return(const Ray& ray, const Bvh& bvh, const SplatSet& set,
                                              std::size_t depth, double dist_threshold,
                                              std::optional<FrameId> frame_filter) {
  if (depth == 0) throw InvalidArgument("intersection depth must be at least 1");
  const auto hits = bvh_all_hits(bvh, set, ray, frame_filter);
  if (hits.empty()) return std::nullopt;

  std::vector<const Hit*> used{&hits.front()};
  const Splat& first = set.splats[hits.front().splat_index];
  for (std::size_t h = 1; h < hits.size() && used.size() < depth; ++h) {
    const double gap = hits[h].t - used.back()->t;
    if (gap < kRayEpsilon) continue;
    if (!same_class(set.splats[hits[h].splat_index], first)) break;
    if (gap > dist_threshold) break;
    used.push_back(&hits[h]);
  }

  const std::size_t n = used.size();
  Vec3 weighted = Vec3::Zero();
  double t = 0, total = 0;
  for (std::size_t d = 1; d <= n; ++d) {
    const double w = depth_weight(d, n);
    weighted += w * used[d - 1]->point;
    t += w * used[d - 1]->t;
    total += w;
  }
  return WeightedReturn{weighted / total, t / total, hits.front().splat_index, n};
}

Scan simulate_scan(const Bvh& bvh, const SplatSet& set, const SensorModel& model, const Pose& pose,
                   const SimulationOptions& options) {
  Scan scan;
  scan.pose = pose;
  if (set.empty()) return scan;
  const auto rays = generate_revolution_rays(model, pose);
  const double sigma = options.noise_sigma.value_or(model.noise_sigma);
  const std::uint64_t scan_seed = splitmix64(options.seed) ^ splitmix64(0xF00DULL + pose.frame);

  std::vector<std::optional<ScanReturn>> slots(rays.size());
  parallel_for(rays.size(), [&](std::size_t r) {
    const Ray& ray = rays[r];
    Vec3 point;
    double range = 0;
    std::size_t splat = 0;
    if (options.multi_depth) {
      const auto ret = weighted_return(ray, bvh, set, options.depth, options.dist_threshold, options.frame_filter);
      if (!ret) return;
      point = ret->point;
      range = (point - ray.origin).norm();
      splat = ret->first_splat;
    } else {
      const auto hit = options.brute_force ? brute_force_first_hit(set, ray, options.frame_filter)
                                           : bvh_first_hit(bvh, set, ray, options.frame_filter);
      if (!hit) return;
      point = hit->point;
      range = hit->t;
      splat = hit->splat_index;
    }
    if (sigma > 0) {
      std::mt19937_64 rng(splitmix64(scan_seed ^ splitmix64(r)));
      std::normal_distribution<double> noise(0.0, sigma);
      range += noise(rng);
      if (!(range > 0)) return;
      point = ray.origin + ray.direction * range;
    }
    if (range > model.range_max) return;
    const Splat& s = set.splats[splat];
    ScanReturn ret;
    ret.point = point;
    ret.range = range;
    ret.azimuth = static_cast<std::uint32_t>(r / static_cast<std::size_t>(model.beams));
    ret.beam = static_cast<std::uint32_t>(r % static_cast<std::size_t>(model.beams));
    ret.splat_index = splat;
    ret.label = s.label;
    ret.group = s.group;
    ret.splat_frame = s.frame_id;
    slots[r] = ret;
  });
  for (auto& s : slots)
    if (s) scan.returns.push_back(*s);
  return scan;
}

PointCloud accumulate_scans(const std::vector<Scan>& scans, bool with_labels) {
  std::size_t n = 0;
  for (const auto& s : scans) n += s.returns.size();
  PointCloud cloud;
  cloud.positions.reserve(n);
  std::vector<ClassId> labels;
  std::vector<SurfaceGroup> groups;
  std::vector<Vec3> sensors;
  std::vector<FrameId> frames;
  ExtraProperty beam{"beam", "ushort", {}}, azimuth{"azimuth_index", "uint", {}}, range{"range", "double", {}};
  for (const auto& scan : scans) {
    for (const auto& r : scan.returns) {
      cloud.positions.push_back(r.point);
      labels.push_back(r.label.value_or(0));
      groups.push_back(r.group);
      sensors.push_back(scan.pose.position);
      frames.push_back(scan.pose.frame);
      beam.values.push_back(r.beam);
      azimuth.values.push_back(r.azimuth);
      range.values.push_back(r.range);
    }
  }
  if (with_labels) cloud.labels = std::move(labels);
  cloud.groups = std::move(groups);
  cloud.sensor_positions = std::move(sensors);
  cloud.frame_ids = std::move(frames);
  cloud.extras = {std::move(beam), std::move(azimuth), std::move(range)};
  return cloud;
}

PointCloud scan_to_cloud(const Scan& scan, bool with_labels) { return accumulate_scans({scan}, with_labels); }

TrajectoryResult simulate_trajectory(const Bvh& bvh, const SplatSet& set, const SensorModel& model,
                                     const std::vector<Pose>& trajectory, const SimulationOptions& options) {
  if (trajectory.empty()) throw InvalidArgument("trajectory is empty");
  const bool gate = set.has_dynamic();
  const bool with_labels = all_labeled(set);
  TrajectoryResult result;
  for (const Pose& pose : trajectory) {
    SimulationOptions opts = options;
    if (gate) opts.frame_filter = pose.frame;
    result.scans.push_back(simulate_scan(bvh, set, model, pose, opts));
  }
  result.accumulated = accumulate_scans(result.scans, with_labels);
  return result;
}

bool all_labeled(const SplatSet& set) {
  return !set.empty() &&
         std::all_of(set.splats.begin(), set.splats.end(), [](const Splat& s) { return s.label.has_value(); });
}

std::vector<Pose> offset_trajectory(const std::vector<Pose>& poses, const Vec3& offset) {
  std::vector<Pose> out = poses;
  for (auto& p : out) p.position += offset;
  return out;
}

std::vector<Pose> linear_trajectory(const Vec3& from, const Vec3& to, std::size_t count, FrameId first_frame) {
  std::vector<Pose> out;
  if (count == 0) return out;
  for (std::size_t i = 0; i < count; ++i) {
    const double s = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    out.push_back({from + s * (to - from), 0.0, static_cast<FrameId>(first_frame + i)});
  }
  return out;
}

std::vector<Pose> parse_trajectory(std::string_view text) {
  std::vector<Pose> poses;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<std::string> tok;
    for (std::string t; fields >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() != 4 && tok.size() != 5)
      throw ConfigError("trajectory line " + std::to_string(line_no) + ": expected 'frame x y z [pitch]'");
    Pose p;
    const double frame = to_double(tok[0], "frame");
    if (frame < 0 || frame != std::floor(frame))
      throw ConfigError("trajectory line " + std::to_string(line_no) + ": frame must be a non-negative integer");
    p.frame = static_cast<FrameId>(frame);
    p.position = Vec3(to_double(tok[1], "x"), to_double(tok[2], "y"), to_double(tok[3], "z"));
    if (tok.size() == 5) p.initial_pitch = to_double(tok[4], "pitch");
    poses.push_back(p);
  }
  return poses;
}

std::vector<Pose> load_trajectory(const std::filesystem::path& path) { return parse_trajectory(read_text(path)); }

void save_trajectory(const std::vector<Pose>& poses, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.precision(17);
  for (const auto& p : poses)
    out << p.frame << ' ' << p.position.x() << ' ' << p.position.y() << ' ' << p.position.z() << ' '
        << p.initial_pitch << '\n';
}

SplatSet splat_dynamic_frames(const std::map<FrameId, PointCloud>& frames, double radius) {
  if (!(radius > 0)) throw InvalidArgument("dynamic splat radius must be positive");
  SplatSet set;
  for (const auto& [frame, cloud] : frames) {
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Vec3& p = cloud.positions[i];
      Vec3 n = Vec3::UnitZ();
      if (cloud.has_normal(i)) {
        n = (*cloud.normals)[i];
      } else if (cloud.sensor_positions) {
        const Vec3 to_sensor = (*cloud.sensor_positions)[i] - p;
        if (to_sensor.norm() > 0) n = to_sensor.normalized();
      }
      Splat s;
      s.center = p;
      s.normal = n;
      s.radius = radius;
      s.group = cloud.groups ? (*cloud.groups)[i] : SurfaceGroup::NonSurface;
      if (cloud.labels) s.label = (*cloud.labels)[i];
      s.frame_id = frame;
      set.splats.push_back(s);
    }
  }
  set.metadata["dynamic_radius"] = std::to_string(radius);
  return set;
}

SplatSet merge_splats(const SplatSet& a, const SplatSet& b) {
  SplatSet out = a;
  out.splats.insert(out.splats.end(), b.splats.begin(), b.splats.end());
  if (a.seeds.size() == a.size() && b.seeds.size() == b.size() && !b.empty())
    out.seeds.insert(out.seeds.end(), b.seeds.begin(), b.seeds.end());
  else if (!b.empty())
    out.seeds.clear();
  for (const auto& [k, v] : b.metadata) out.metadata.emplace(k, v);
  return out;
}

}  // namespace splatsim
