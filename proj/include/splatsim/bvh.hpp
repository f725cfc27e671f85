#pragma once

#include "splatsim/cloud.hpp"

#include <Eigen/Geometry>

#include <optional>
#include <vector>

namespace splatsim {

// Hits closer than this to the ray origin are ignored (self-intersection guard).
inline constexpr double kRayEpsilon = 1e-4;
// Rays with |d . n| below this never hit the splat.
inline constexpr double kParallelTolerance = 1e-12;

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();  // unit
  double max_range = std::numeric_limits<double>::infinity();
};

struct Hit {
  double t = 0;
  Vec3 point = Vec3::Zero();
  std::size_t splat_index = 0;
};

// Plane intersection followed by the in-disk test. Returns the ray parameter
// when the ray hits the disk inside (t_min, max_range].
template <typename Scalar>
std::optional<Scalar> intersect_splat(const Vector3<Scalar>& origin, const Vector3<Scalar>& direction,
                                      const Vector3<Scalar>& center, const Vector3<Scalar>& normal,
                                      Scalar radius, Scalar max_range,
                                      Scalar t_min = Scalar(kRayEpsilon)) {
  const Scalar denom = direction.dot(normal);
  if (std::abs(denom) < Scalar(kParallelTolerance)) return std::nullopt;
  const Scalar t = (center - origin).dot(normal) / denom;
  if (!(t > t_min) || t > max_range) return std::nullopt;
  const Vector3<Scalar> v = origin + direction * t - center;
  if (!(v.dot(v) < radius * radius)) return std::nullopt;
  return t;
}

std::optional<Hit> intersect_splat(const Ray& ray, const Splat& splat, std::size_t index);

// Bounding-volume hierarchy over splats. Each splat is boxed by a cube of side
// equal to its diameter. Median split on the longest centroid axis, leaves of
// at most four splats. Read-only after build.
class Bvh {
 public:
  struct Node {
    Eigen::AlignedBox3d box;
    std::uint32_t begin = 0, count = 0;  // leaf range into `order`
    std::int32_t left = -1, right = -1;
    bool is_leaf() const { return left < 0; }
  };

  static constexpr std::uint32_t kMaxLeafSize = 4;

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::uint32_t>& order() const { return order_; }
  std::size_t splat_count() const { return order_.size(); }

 private:
  friend Bvh build_bvh(const SplatSet& set);
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
};

// Throws InvalidArgument for an empty set.
Bvh build_bvh(const SplatSet& set);

// Accepts a splat only when it carries no frame id or matches the filter.
inline bool passes_frame_filter(const Splat& s, std::optional<FrameId> filter) {
  return !filter || !s.frame_id || *s.frame_id == *filter;
}

// Minimum-t hit; equal t resolved by lower splat index.
std::optional<Hit> bvh_first_hit(const Bvh& bvh, const SplatSet& set, const Ray& ray,
                                 std::optional<FrameId> frame_filter = std::nullopt);
// All hits sorted by (t, splat index).
std::vector<Hit> bvh_all_hits(const Bvh& bvh, const SplatSet& set, const Ray& ray,
                              std::optional<FrameId> frame_filter = std::nullopt);

// Linear scans over every splat, same semantics as the BVH queries.
std::optional<Hit> brute_force_first_hit(const SplatSet& set, const Ray& ray,
                                         std::optional<FrameId> frame_filter = std::nullopt);
std::vector<Hit> brute_force_all_hits(const SplatSet& set, const Ray& ray,
                                      std::optional<FrameId> frame_filter = std::nullopt);

}  // namespace splatsim
