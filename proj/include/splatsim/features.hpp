#pragma once

#include "splatsim/cloud.hpp"
#include "splatsim/point_index.hpp"

#include <Eigen/Eigenvalues>

#include <span>

namespace splatsim {

inline constexpr std::size_t kDefaultK = 40;

// Principal axes of a neighborhood. Eigenvalues descend; the columns of
// `axes` are the matching unit eigenvectors, each with its first nonzero
// component positive.
struct PcaFrame {
  Vec3 eigenvalues = Vec3::Zero();
  Mat3 axes = Mat3::Identity();
  Vec3 centroid = Vec3::Zero();

  // Direction of least spread.
  Vec3 normal() const { return axes.col(2); }
};

namespace detail {
void canonicalize_sign(Mat3& axes);
}

// PCA of the columns of a 3xN matrix. Throws DegenerateError for fewer than
// three points or when every point coincides.
template <typename Derived>
PcaFrame neighborhood_pca(const Eigen::MatrixBase<Derived>& points) {
  static_assert(Derived::RowsAtCompileTime == 3, "points must be a 3xN matrix");
  const Eigen::Index n = points.cols();
  if (n < 3) throw DegenerateError("PCA needs at least three points");
  PcaFrame frame;
  frame.centroid = points.rowwise().mean().template cast<double>();
  const Eigen::Matrix3Xd centered = points.template cast<double>().colwise() - frame.centroid;
  const Mat3 covariance = centered * centered.transpose() / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Mat3> solver(covariance);
  // Solver returns ascending order; flip to descending and clamp round-off below zero.
  frame.eigenvalues = solver.eigenvalues().reverse().cwiseMax(0.0);
  frame.axes = solver.eigenvectors().rowwise().reverse();
  if (!(frame.eigenvalues[0] > 0)) throw DegenerateError("all neighborhood points coincide");
  detail::canonicalize_sign(frame.axes);
  return frame;
}

PcaFrame neighborhood_pca(std::span<const Vec3> points);

struct Descriptors {
  double linearity = 0;
  double planarity = 0;
  double sphericity = 0;
};

// From descending eigenvalues; throws DegenerateError when the largest is zero.
Descriptors eigen_descriptors(const Vec3& eigenvalues);
// Largest descriptor wins; ties go to linearity, then planarity.
SurfaceGroup descriptor_group(const Descriptors& d);

struct ScaleStats {
  double r_bar = 0;  // mean distance to the k-th nearest neighbor
  double e_bar = 0;  // mean |n_i . (p_k - p_i)| pooled over every (point, neighbor) pair
  std::size_t k = kDefaultK;
};

enum class OrientationFallback { Viewpoint, UpZ, None };

struct NormalOptions {
  // Used for points without a sensor position.
  OrientationFallback fallback = OrientationFallback::UpZ;
  Vec3 viewpoint = Vec3::Zero();
};

// Mean distance to the k-th nearest neighbor (self excluded).
double mean_knn_radius(const PointCloud& cloud, const PointIndex& index, std::size_t k);

// Normal per point from the restricted neighborhood (stats.k, stats.r_bar),
// oriented toward the sensor. Points with fewer than three neighbors get a zero
// (flagged) normal.
PointCloud estimate_normals(const PointCloud& cloud, const PointIndex& index, const ScaleStats& stats,
                            const NormalOptions& options = {});

// R-bar and E-bar for a cloud whose normals are already estimated.
ScaleStats compute_scale_stats(const PointCloud& cloud, const PointIndex& index, std::size_t k);

// E-bar only, for a given neighborhood size and radius.
double mean_plane_error(const PointCloud& cloud, const PointIndex& index, std::size_t k, double r_bar);

struct Classification {
  PointCloud cloud;                     // groups filled in
  std::vector<std::size_t> degenerate;  // points whose neighborhood had no spread
};

// Groups each point as Linear, GroundSurface or NonSurface by its dominant
// eigenvalue descriptor. Degenerate points are grouped NonSurface.
Classification classify_by_descriptors(const PointCloud& cloud, const PointIndex& index,
                                       const ScaleStats& stats);

}  // namespace splatsim
