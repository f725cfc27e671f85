#include "splatsim/evaluate.hpp"

#include "splatsim/parallel.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace splatsim {

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<double> nearest_distances(const PointCloud& sim, const PointIndex& ori) {
  std::vector<double> d(sim.size());
  parallel_for(sim.size(), [&](std::size_t i) { d[i] = ori.nearest(sim.positions[i]).distance; });
  return d;
}

double c2c_distance(const PointCloud& sim, const PointCloud& ori) {
  if (sim.empty() || ori.empty()) throw InvalidArgument("C2C needs two non-empty clouds");
  const PointIndex index(ori.positions);
  return mean_of(nearest_distances(sim, index));
}

double c2c_to_plane(const PointCloud& sim, const Eigen::Hyperplane<double, 3>& plane) {
  if (sim.empty()) throw InvalidArgument("C2C needs a non-empty cloud");
  std::vector<double> d(sim.size());
  for (std::size_t i = 0; i < sim.size(); ++i) d[i] = plane.absDistance(sim.positions[i]);
  return mean_of(d);
}

std::vector<ClassC2C> c2c_per_class(const PointCloud& sim, const PointCloud& ori,
                                    std::span<const ClassId> classes) {
  if (!sim.labels || !ori.labels) throw InvalidArgument("per-class C2C needs labels on both clouds");
  std::vector<ClassC2C> table;
  for (ClassId c : classes) {
    std::vector<std::size_t> sim_idx, ori_idx;
    for (std::size_t i = 0; i < sim.size(); ++i)
      if ((*sim.labels)[i] == c) sim_idx.push_back(i);
    for (std::size_t i = 0; i < ori.size(); ++i)
      if ((*ori.labels)[i] == c) ori_idx.push_back(i);
    ClassC2C entry;
    entry.id = c;
    entry.count = sim_idx.size();
    if (!sim_idx.empty() && !ori_idx.empty()) {
      entry.present = true;
      entry.mean = c2c_distance(select(sim, sim_idx), select(ori, ori_idx));
    }
    table.push_back(entry);
  }
  return table;
}

DensitySummary density_stats(const PointCloud& cloud, double radius) {
  if (!(radius > 0)) throw InvalidArgument("density radius must be positive");
  DensitySummary s;
  if (cloud.empty()) return s;
  const PointIndex index(cloud.positions);
  std::vector<double> counts(cloud.size());
  parallel_for(cloud.size(), [&](std::size_t i) {
    counts[i] = static_cast<double>(index.count_within(cloud.positions[i], radius) - 1);
  });
  s.mean = mean_of(counts);
  double var = 0;
  for (double c : counts) var += (c - s.mean) * (c - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(counts.size()));
  s.cv = s.mean > 0 ? s.stddev / s.mean : 0.0;
  return s;
}

double coverage_fraction(const SplatSet& set, const PointCloud& cloud, double tolerance) {
  if (!(tolerance > 0)) throw InvalidArgument("coverage tolerance must be positive");
  if (set.empty() || cloud.empty()) return 0.0;
  std::vector<Vec3> centers;
  double max_radius = 0;
  for (const auto& s : set.splats) {
    centers.push_back(s.center);
    max_radius = std::max(max_radius, s.radius);
  }
  const PointIndex index(centers);
  std::vector<std::uint8_t> covered(cloud.size(), 0);
  parallel_for(cloud.size(), [&](std::size_t i) {
    const Vec3& p = cloud.positions[i];
    for (const auto& nb : index.within(p, max_radius + tolerance)) {
      const Splat& s = set.splats[nb.index];
      const Vec3 v = p - s.center;
      const double h = s.normal.dot(v);
      if (std::abs(h) <= tolerance && (v - h * s.normal).norm() <= s.radius) {
        covered[i] = 1;
        return;
      }
    }
  });
  std::size_t n = 0;
  for (auto c : covered) n += c;
  return static_cast<double>(n) / static_cast<double>(cloud.size());
}

std::string report_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "metric,class,value,count\n";
  out << "c2c,," << num(r.c2c) << ',' << r.sim_points << '\n';
  if (r.c2c_plane) out << "c2c_plane,," << num(*r.c2c_plane) << ',' << r.sim_points << '\n';
  for (const auto& c : r.per_class)
    out << "c2c_class," << c.id << ',' << (c.present ? num(c.mean) : std::string("absent")) << ',' << c.count
        << '\n';
  if (r.density) {
    out << "density_mean,," << num(r.density->mean) << ',' << r.sim_points << '\n';
    out << "density_std,," << num(r.density->stddev) << ',' << r.sim_points << '\n';
    out << "density_cv,," << num(r.density->cv) << ',' << r.sim_points << '\n';
  }
  if (r.coverage) out << "coverage,," << num(*r.coverage) << ',' << r.ori_points << '\n';
  if (r.primitives) out << "primitives,," << *r.primitives << ',' << *r.primitives << '\n';
  return out.str();
}

std::string timings_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "stage,seconds\n";
  for (const auto& [stage, seconds] : r.timings) out << stage << ',' << num(seconds) << '\n';
  return out.str();
}

std::string report_summary(const EvalReport& r) {
  std::ostringstream out;
  out.precision(6);
  out << "simulated points: " << r.sim_points << "\n";
  out << "original points:  " << r.ori_points << "\n";
  out << "C2C (sim -> ori): " << r.c2c << " m\n";
  if (r.c2c_plane) out << "C2C to plane:     " << *r.c2c_plane << " m\n";
  if (!r.per_class.empty()) {
    out << "per-class C2C (class-to-class):\n";
    for (const auto& c : r.per_class) {
      out << "  class " << c.id << ": ";
      if (c.present)
        out << c.mean << " m over " << c.count << " points\n";
      else
        out << "absent\n";
    }
  }
  if (r.density)
    out << "density: mean " << r.density->mean << ", std " << r.density->stddev << ", cv " << r.density->cv << "\n";
  if (r.coverage) out << "coverage: " << *r.coverage << "\n";
  if (r.primitives) out << "primitives: " << *r.primitives << "\n";
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace splatsim
