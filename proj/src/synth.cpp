#include "splatsim/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace splatsim::synth {

namespace {

void finish(PointCloud& cloud, std::vector<ClassId> labels, std::vector<Vec3> sensors) {
  cloud.labels = std::move(labels);
  cloud.sensor_positions = std::move(sensors);
  cloud.frame_ids = std::vector<FrameId>(cloud.size(), 0);
}

}  // namespace

PointCloud plane(const PlaneOptions& o) {
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> u(-o.extent / 2, o.extent / 2);
  std::normal_distribution<double> noise(0.0, o.noise_sigma > 0 ? o.noise_sigma : 1.0);
  PointCloud cloud;
  cloud.positions.reserve(o.count);
  for (std::size_t i = 0; i < o.count; ++i) {
    const double x = u(rng), y = u(rng);
    const double z = o.noise_sigma > 0 ? noise(rng) : 0.0;
    cloud.positions.emplace_back(x, y, z);
  }
  finish(cloud, std::vector<ClassId>(o.count, kGroundClass), std::vector<Vec3>(o.count, o.sensor));
  return cloud;
}

PointCloud dihedral(const DihedralOptions& o) {
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> along(0.0, o.extent);
  std::uniform_real_distribution<double> across(-o.extent / 2, o.extent / 2);
  std::normal_distribution<double> noise(0.0, o.noise_sigma > 0 ? o.noise_sigma : 1.0);
  auto jitter = [&] { return o.noise_sigma > 0 ? noise(rng) : 0.0; };
  PointCloud cloud;
  std::vector<ClassId> labels;
  std::vector<Vec3> sensors;
  const Vec3 sensor(o.extent / 2, 0.0, o.extent / 2);
  for (std::size_t i = 0; i < o.count_per_face; ++i) {
    cloud.positions.emplace_back(along(rng), across(rng), jitter());
    labels.push_back(kGroundClass);
    sensors.push_back(sensor);
  }
  for (std::size_t i = 0; i < o.count_per_face; ++i) {
    const double y = across(rng), z = along(rng);
    cloud.positions.emplace_back(jitter(), y, z);
    labels.push_back(kFeatureClass);
    sensors.push_back(sensor);
  }
  finish(cloud, std::move(labels), std::move(sensors));
  return cloud;
}

PointCloud pole(const PoleOptions& o) {
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> u(-o.ground_extent / 2, o.ground_extent / 2);
  std::uniform_real_distribution<double> angle(0.0, 2 * std::numbers::pi);
  std::uniform_real_distribution<double> height(0.0, o.pole_height);
  std::normal_distribution<double> noise(0.0, o.noise_sigma > 0 ? o.noise_sigma : 1.0);
  auto jitter = [&] { return o.noise_sigma > 0 ? noise(rng) : 0.0; };

  PointCloud cloud;
  std::vector<ClassId> labels;
  std::vector<Vec3> sensors;
  for (std::size_t i = 0; i < o.ground_count; ++i) {
    double x = u(rng), y = u(rng);
    // Keep the pole footprint free of ground samples.
    if (std::hypot(x - o.pole_base.x(), y - o.pole_base.y()) < o.pole_radius) {
      --i;
      continue;
    }
    const Vec3 p(x, y, jitter());
    cloud.positions.push_back(p);
    labels.push_back(kGroundClass);
    sensors.push_back(Vec3(x, y, 2.0));
  }
  for (std::size_t i = 0; i < o.pole_count; ++i) {
    const double a = angle(rng);
    const Vec3 radial(std::cos(a), std::sin(a), 0.0);
    const double r = o.pole_radius + jitter();
    const Vec3 p = o.pole_base + r * radial + Vec3(0, 0, height(rng));
    cloud.positions.push_back(p);
    labels.push_back(kFeatureClass);
    // Each pole sample is seen from outside the cylinder.
    sensors.push_back(p + 2.0 * radial);
  }
  finish(cloud, std::move(labels), std::move(sensors));
  return cloud;
}

PointCloud scanlines(const ScanlineOptions& o) {
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> jitter_line(-o.line_jitter, o.line_jitter);
  std::uniform_real_distribution<double> jitter_point(-o.point_spacing / 4, o.point_spacing / 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, o.noise_sigma > 0 ? o.noise_sigma : 1.0);
  PointCloud cloud;
  std::vector<ClassId> labels;
  std::vector<Vec3> sensors;
  const auto per_line = static_cast<std::size_t>(o.length / o.point_spacing);
  double y = 0, gap = o.line_spacing;
  for (std::size_t l = 0; l < o.lines; ++l) {
    const double y0 = y + jitter_line(rng);
    for (std::size_t k = 0; k < per_line; ++k) {
      const double x = static_cast<double>(k) * o.point_spacing + jitter_point(rng);
      double z = o.noise_sigma > 0 ? noise(rng) : 0.0;
      if (o.spike_fraction > 0 && unit(rng) < o.spike_fraction) z += unit(rng) < 0.5 ? -o.spike_offset : o.spike_offset;
      cloud.positions.emplace_back(x, y0, z);
      labels.push_back(kGroundClass);
      sensors.push_back(Vec3(x, -3.0, 2.0));
    }
    y += gap;
    gap *= o.spacing_growth;
  }
  finish(cloud, std::move(labels), std::move(sensors));
  return cloud;
}

GroupMapping mapping_for(std::string_view scene) {
  GroupMapping m;
  m.groups[kGroundClass] = SurfaceGroup::Ground;
  m.groups[kFeatureClass] = scene == "pole" ? SurfaceGroup::Linear : SurfaceGroup::Surface;
  return m;
}

}  // namespace splatsim::synth
