#pragma once

#include "splatsim/bvh.hpp"
#include "splatsim/cloud.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace splatsim {

// Spinning multi-beam sensor. Beam j fires at elevation_min + j * elevation_step;
// pulse i at azimuth i * azimuth_step. Angles in degrees, positive elevation up.
struct SensorModel {
  std::string name = "custom";
  int beams = 32;
  double azimuth_step = 0.2;
  double elevation_min = -30.67;
  double elevation_max = 10.67;
  double elevation_step = 1.33;
  int pulses_per_rev = 1800;
  double range_max = 100;
  double noise_sigma = 0;

  std::size_t rays_per_revolution() const {
    return static_cast<std::size_t>(beams) * static_cast<std::size_t>(pulses_per_rev);
  }
  double vertical_fov() const { return elevation_max - elevation_min; }
  double elevation(int beam) const { return elevation_min + beam * elevation_step; }
  double azimuth(int pulse) const { return pulse * azimuth_step; }
  void validate() const;
};

// "hdl32" or "hdl64"; throws ConfigError otherwise.
SensorModel sensor_preset(std::string_view name);
// `key = value` lines over the SensorModel fields; `preset = hdl32` seeds the defaults.
SensorModel parse_sensor_model(std::string_view text);
SensorModel load_sensor_model(const std::filesystem::path& path);

struct Pose {
  Vec3 position = Vec3::Zero();
  double initial_pitch = 0;  // degrees
  FrameId frame = 0;
};

// Unit direction for the given azimuth and elevation (degrees): yaw about z of
// a ray pitched about y from the +x reference.
Vec3 ray_direction(double azimuth_deg, double elevation_deg, double initial_pitch_deg = 0);

// Ordered by azimuth index, then beam index.
std::vector<Ray> generate_revolution_rays(const SensorModel& model, const Pose& pose);

// Kernel weight for accumulated hit d (1-based) out of `depth`.
double depth_weight(std::size_t d, std::size_t depth);

struct WeightedReturn {
  Vec3 point = Vec3::Zero();
  double t = 0;
  std::size_t first_splat = 0;
  std::size_t depth = 0;  // hits that contributed
};

// Averages up to `depth` consecutive same-class hits along the ray, stopping at a
// class change or a gap above `dist_threshold`. Hits within the self-intersection
// guard of the previous accepted hit are skipped.
std::optional<WeightedReturn> weighted_return(const Ray& ray, const Bvh& bvh, const SplatSet& set,
                                              std::size_t depth, double dist_threshold,
                                              std::optional<FrameId> frame_filter = std::nullopt);

struct ScanReturn {
  Vec3 point = Vec3::Zero();
  double range = 0;
  std::uint32_t beam = 0;
  std::uint32_t azimuth = 0;
  std::size_t splat_index = 0;
  std::optional<ClassId> label;
  SurfaceGroup group = SurfaceGroup::Surface;
  std::optional<FrameId> splat_frame;
};

struct Scan {
  Pose pose;
  std::vector<ScanReturn> returns;
};

struct SimulationOptions {
  std::optional<double> noise_sigma;  // overrides the model's sigma when set
  bool multi_depth = false;
  std::size_t depth = 5;
  double dist_threshold = 0.10;
  std::optional<FrameId> frame_filter;
  std::uint64_t seed = 0;
  bool brute_force = false;  // linear scan instead of the BVH (first-hit mode)
};

Scan simulate_scan(const Bvh& bvh, const SplatSet& set, const SensorModel& model, const Pose& pose,
                   const SimulationOptions& options);

struct TrajectoryResult {
  std::vector<Scan> scans;
  PointCloud accumulated;
};

// One scan per pose. When the set holds dynamic splats each scan is gated to
// its pose's frame.
TrajectoryResult simulate_trajectory(const Bvh& bvh, const SplatSet& set, const SensorModel& model,
                                     const std::vector<Pose>& trajectory, const SimulationOptions& options);

// Scan returns as a cloud with beam, azimuth index and range kept as extra properties.
PointCloud scan_to_cloud(const Scan& scan, bool with_labels);
PointCloud accumulate_scans(const std::vector<Scan>& scans, bool with_labels);
// True when every splat carries a class label.
bool all_labeled(const SplatSet& set);

std::vector<Pose> offset_trajectory(const std::vector<Pose>& poses, const Vec3& offset);
// `count` evenly spaced poses from `from` to `to` inclusive, frames numbered from `first_frame`.
std::vector<Pose> linear_trajectory(const Vec3& from, const Vec3& to, std::size_t count,
                                    FrameId first_frame = 0);

// One `frame x y z [pitch_deg]` per line.
std::vector<Pose> parse_trajectory(std::string_view text);
std::vector<Pose> load_trajectory(const std::filesystem::path& path);
void save_trajectory(const std::vector<Pose>& poses, const std::filesystem::path& path);

inline constexpr double kDynamicSplatRadius = 0.14;

// One fixed-radius splat per dynamic point, tagged with its frame.
SplatSet splat_dynamic_frames(const std::map<FrameId, PointCloud>& frames,
                              double radius = kDynamicSplatRadius);

// Appends b to a, keeping seeds only if both carry them.
SplatSet merge_splats(const SplatSet& a, const SplatSet& b);

}  // namespace splatsim
