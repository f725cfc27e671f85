#pragma once

#include "splatsim/cloud.hpp"
#include "splatsim/point_index.hpp"

#include <Eigen/Geometry>

#include <filesystem>
#include <span>

namespace splatsim {

// Distance from each sim point to its exact nearest neighbor in the index.
std::vector<double> nearest_distances(const PointCloud& sim, const PointIndex& ori);

// Mean nearest-neighbor distance from sim into ori (asymmetric). Throws
// InvalidArgument on empty input.
double c2c_distance(const PointCloud& sim, const PointCloud& ori);

// Mean unsigned distance from sim points to an analytic plane.
double c2c_to_plane(const PointCloud& sim, const Eigen::Hyperplane<double, 3>& plane);

struct ClassC2C {
  ClassId id = 0;
  bool present = false;  // false when the class is missing from either cloud
  double mean = 0;
  std::size_t count = 0;  // sim points of the class
};

// Sim points of class c measured against ori points of class c only.
std::vector<ClassC2C> c2c_per_class(const PointCloud& sim, const PointCloud& ori,
                                    std::span<const ClassId> classes);

struct DensitySummary {
  double mean = 0;
  double stddev = 0;
  double cv = 0;
};

// Statistics of per-point neighbor counts within `radius` (self excluded).
DensitySummary density_stats(const PointCloud& cloud, double radius);

// Fraction of points lying on some splat: plane distance <= tolerance and
// in-plane offset from the center <= radius.
double coverage_fraction(const SplatSet& set, const PointCloud& cloud, double tolerance);

struct EvalReport {
  std::size_t sim_points = 0;
  std::size_t ori_points = 0;
  double c2c = 0;
  std::optional<double> c2c_plane;
  std::vector<ClassC2C> per_class;
  std::optional<DensitySummary> density;
  std::optional<double> coverage;
  std::optional<std::size_t> primitives;
  std::vector<std::pair<std::string, double>> timings;
};

// Rows of `metric,class,value,count`.
std::string report_csv(const EvalReport& report);
// Rows of `stage,seconds`.
std::string timings_csv(const EvalReport& report);
std::string report_summary(const EvalReport& report);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace splatsim
