#pragma once

#include "splatsim/cloud.hpp"

#include <Eigen/Geometry>

#include <span>
#include <vector>

namespace splatsim {

struct Neighbor {
  std::size_t index = 0;
  double distance = 0;
};

// Exact k-d tree over a fixed point set. Ties in distance are broken by the
// lower point index, so results do not depend on build order. Read-only after
// construction and safe to query concurrently.
class PointIndex {
 public:
  explicit PointIndex(std::span<const Vec3> points);

  std::size_t size() const { return points_.size(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  // k nearest points sorted by ascending distance.
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k,
                            std::optional<std::size_t> exclude = std::nullopt) const;
  // All points with distance <= radius, sorted by ascending distance.
  std::vector<Neighbor> within(const Vec3& query, double radius,
                               std::optional<std::size_t> exclude = std::nullopt) const;
  std::size_t count_within(const Vec3& query, double radius) const;
  Neighbor nearest(const Vec3& query) const;

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    std::uint32_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);

  template <typename Visit>
  void search(const Vec3& query, Visit&& visit) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Vec3> ordered_;
  std::vector<Node> nodes_;
};

// Throws InvalidArgument on an empty cloud.
PointIndex build_point_index(const PointCloud& cloud);

// The k nearest neighbors of a point, then clipped to `radius`, the point itself excluded.
std::vector<Neighbor> restricted_neighborhood(const PointIndex& index, std::size_t point,
                                              std::size_t k, double radius);
std::vector<Neighbor> restricted_neighborhood(const PointIndex& index, const Vec3& position,
                                              std::size_t k, double radius,
                                              std::optional<std::size_t> exclude = std::nullopt);

}  // namespace splatsim
