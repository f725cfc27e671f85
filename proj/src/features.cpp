#include "splatsim/features.hpp"

#include "splatsim/parallel.hpp"

#include <numeric>

namespace splatsim {

namespace detail {
void canonicalize_sign(Mat3& axes) {
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < 3; ++r) {
      const double v = axes(r, c);
      if (std::abs(v) > 1e-12) {
        if (v < 0) axes.col(c) = -axes.col(c);
        break;
      }
    }
  }
}
}  // namespace detail

PcaFrame neighborhood_pca(std::span<const Vec3> points) {
  Eigen::Matrix3Xd m(3, static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = points[i];
  return neighborhood_pca(m);
}

Descriptors eigen_descriptors(const Vec3& ev) {
  if (!(ev[0] > 0)) throw DegenerateError("largest eigenvalue is zero");
  return {(ev[0] - ev[1]) / ev[0], (ev[1] - ev[2]) / ev[0], ev[2] / ev[0]};
}

SurfaceGroup descriptor_group(const Descriptors& d) {
  if (d.linearity >= d.planarity && d.linearity >= d.sphericity) return SurfaceGroup::Linear;
  if (d.planarity >= d.sphericity) return SurfaceGroup::GroundSurface;
  return SurfaceGroup::NonSurface;
}

namespace {

// Self plus its restricted neighborhood as a 3xN matrix.
Eigen::Matrix3Xd gather(const PointCloud& cloud, std::size_t i, const std::vector<Neighbor>& nbrs) {
  Eigen::Matrix3Xd m(3, static_cast<Eigen::Index>(nbrs.size() + 1));
  m.col(0) = cloud.positions[i];
  for (std::size_t j = 0; j < nbrs.size(); ++j)
    m.col(static_cast<Eigen::Index>(j + 1)) = cloud.positions[nbrs[j].index];
  return m;
}

}  // namespace

double mean_knn_radius(const PointCloud& cloud, const PointIndex& index, std::size_t k) {
  if (k == 0) throw InvalidArgument("k must be positive");
  if (cloud.size() < k + 1)
    throw InvalidArgument("cloud has " + std::to_string(cloud.size()) + " points, need at least k+1 = " +
                          std::to_string(k + 1));
  std::vector<double> kth(cloud.size());
  parallel_for(cloud.size(), [&](std::size_t i) { kth[i] = index.knn(cloud.positions[i], k, i).back().distance; });
  return std::accumulate(kth.begin(), kth.end(), 0.0) / static_cast<double>(kth.size());
}

PointCloud estimate_normals(const PointCloud& cloud, const PointIndex& index, const ScaleStats& stats,
                            const NormalOptions& options) {
  PointCloud out = cloud;
  std::vector<Vec3> normals(cloud.size(), Vec3::Zero());
  parallel_for(cloud.size(), [&](std::size_t i) {
    const auto nbrs = restricted_neighborhood(index, i, stats.k, stats.r_bar);
    if (nbrs.size() < 3) return;
    PcaFrame frame;
    try {
      frame = neighborhood_pca(gather(cloud, i, nbrs));
    } catch (const DegenerateError&) {
      return;
    }
    Vec3 n = frame.normal();
    const Vec3& p = cloud.positions[i];
    double facing = 0;
    if (cloud.sensor_positions) {
      facing = n.dot((*cloud.sensor_positions)[i] - p);
    } else if (options.fallback == OrientationFallback::Viewpoint) {
      facing = n.dot(options.viewpoint - p);
    } else if (options.fallback == OrientationFallback::UpZ) {
      facing = n.z();
    }
    if (facing < 0) n = -n;
    normals[i] = n.normalized();
  });
  out.normals = std::move(normals);
  return out;
}

double mean_plane_error(const PointCloud& cloud, const PointIndex& index, std::size_t k, double r_bar) {
  if (!cloud.normals) throw InvalidArgument("error bound requires estimated normals");
  std::vector<double> sums(cloud.size(), 0.0);
  std::vector<std::size_t> counts(cloud.size(), 0);
  parallel_for(cloud.size(), [&](std::size_t i) {
    if (!cloud.has_normal(i)) return;
    const Vec3& n = (*cloud.normals)[i];
    const Vec3& p = cloud.positions[i];
    double s = 0;
    const auto nbrs = restricted_neighborhood(index, i, k, r_bar);
    for (const auto& nb : nbrs) s += std::abs(n.dot(cloud.positions[nb.index] - p));
    sums[i] = s;
    counts[i] = nbrs.size();
  });
  double total = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < sums.size(); ++i) {
    total += sums[i];
    pairs += counts[i];
  }
  return pairs ? total / static_cast<double>(pairs) : 0.0;
}

ScaleStats compute_scale_stats(const PointCloud& cloud, const PointIndex& index, std::size_t k) {
  ScaleStats stats;
  stats.k = k;
  stats.r_bar = mean_knn_radius(cloud, index, k);
  stats.e_bar = mean_plane_error(cloud, index, k, stats.r_bar);
  return stats;
}

Classification classify_by_descriptors(const PointCloud& cloud, const PointIndex& index,
                                       const ScaleStats& stats) {
  Classification out;
  out.cloud = cloud;
  std::vector<SurfaceGroup> groups(cloud.size(), SurfaceGroup::NonSurface);
  std::vector<std::uint8_t> degenerate(cloud.size(), 0);
  parallel_for(cloud.size(), [&](std::size_t i) {
    const auto nbrs = restricted_neighborhood(index, i, stats.k, stats.r_bar);
    try {
      if (nbrs.size() < 2) throw DegenerateError("too few neighbors");
      const PcaFrame frame = neighborhood_pca(gather(cloud, i, nbrs));
      groups[i] = descriptor_group(eigen_descriptors(frame.eigenvalues));
    } catch (const DegenerateError&) {
      degenerate[i] = 1;
    }
  });
  for (std::size_t i = 0; i < degenerate.size(); ++i)
    if (degenerate[i]) out.degenerate.push_back(i);
  out.cloud.groups = std::move(groups);
  return out;
}

}  // namespace splatsim
