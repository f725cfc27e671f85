#include "splatsim/bvh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace splatsim {

namespace {

// Boxes are padded by a relative margin so rounding in the slab test never
// rejects a ray that the exact disk test would accept.
constexpr double kBoxPad = 1e-7;

Eigen::AlignedBox3d splat_box(const Splat& s) {
  const double half = s.radius * (1.0 + kBoxPad) + kBoxPad * s.center.cwiseAbs().maxCoeff();
  const Vec3 h = Vec3::Constant(half);
  return {s.center - h, s.center + h};
}

struct SlabRay {
  Vec3 origin;
  Vec3 inv_dir;
  double t_max;
};

// Entry distance into the box, or +inf when the ray misses it within [0, t_max].
double slab_entry(const Eigen::AlignedBox3d& box, const SlabRay& r) {
  double t0 = 0.0, t1 = r.t_max;
  for (int a = 0; a < 3; ++a) {
    double ta = (box.min()[a] - r.origin[a]) * r.inv_dir[a];
    double tb = (box.max()[a] - r.origin[a]) * r.inv_dir[a];
    // 0 * inf yields NaN when the origin lies on a slab plane of an axis-parallel ray;
    // fmin/fmax drop the NaN and keep the other bound.
    if (ta > tb) std::swap(ta, tb);
    t0 = std::fmax(t0, ta);
    t1 = std::fmin(t1, tb * (1.0 + 4 * std::numeric_limits<double>::epsilon()));
    if (t0 > t1) return std::numeric_limits<double>::infinity();
  }
  return t0;
}

bool hit_less(const Hit& a, const Hit& b) {
  return a.t < b.t || (a.t == b.t && a.splat_index < b.splat_index);
}

std::int32_t build_node(std::vector<Bvh::Node>& nodes, std::vector<std::uint32_t>& order,
                        const SplatSet& set, std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes.size());
  nodes.push_back({});
  Eigen::AlignedBox3d box, centroids;
  for (std::uint32_t i = begin; i < end; ++i) {
    const Splat& s = set.splats[order[i]];
    box.extend(splat_box(s));
    centroids.extend(s.center);
  }
  nodes[id].box = box;
  if (end - begin <= Bvh::kMaxLeafSize) {
    nodes[id].begin = begin;
    nodes[id].count = end - begin;
    return id;
  }
  Eigen::Index axis = 0;
  centroids.sizes().maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ca = set.splats[a].center[axis], cb = set.splats[b].center[axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const auto left = build_node(nodes, order, set, begin, mid);
  const auto right = build_node(nodes, order, set, mid, end);
  nodes[id].left = left;
  nodes[id].right = right;
  return id;
}

SlabRay make_slab_ray(const Ray& ray) {
  return {ray.origin, ray.direction.cwiseInverse(), ray.max_range};
}

}  // namespace

std::optional<Hit> intersect_splat(const Ray& ray, const Splat& splat, std::size_t index) {
  const auto t = intersect_splat<double>(ray.origin, ray.direction, splat.center, splat.normal,
                                         splat.radius, ray.max_range);
  if (!t) return std::nullopt;
  return Hit{*t, ray.origin + ray.direction * *t, index};
}

Bvh build_bvh(const SplatSet& set) {
  if (set.empty()) throw InvalidArgument("cannot build a BVH over an empty splat set");
  Bvh bvh;
  bvh.order_.resize(set.size());
  std::iota(bvh.order_.begin(), bvh.order_.end(), 0u);
  bvh.nodes_.reserve(2 * set.size() / Bvh::kMaxLeafSize + 1);
  build_node(bvh.nodes_, bvh.order_, set, 0, static_cast<std::uint32_t>(set.size()));
  return bvh;
}

std::optional<Hit> bvh_first_hit(const Bvh& bvh, const SplatSet& set, const Ray& ray,
                                 std::optional<FrameId> frame_filter) {
  const auto& nodes = bvh.nodes();
  if (nodes.empty()) return std::nullopt;
  const SlabRay slab = make_slab_ray(ray);
  std::optional<Hit> best;
  double best_t = std::numeric_limits<double>::infinity();

  struct Entry {
    std::int32_t node;
    double t;
  };
  Entry stack[128];
  int top = 0;
  const double t_root = slab_entry(nodes[0].box, slab);
  if (std::isinf(t_root)) return std::nullopt;
  stack[top++] = {0, t_root};

  while (top > 0) {
    const Entry e = stack[--top];
    // Equal entry distance is still visited: a tie at best_t may have a lower index.
    if (e.t > best_t) continue;
    const Bvh::Node& node = nodes[e.node];
    if (node.is_leaf()) {
      for (std::uint32_t i = 0; i < node.count; ++i) {
        const std::uint32_t idx = bvh.order()[node.begin + i];
        const Splat& s = set.splats[idx];
        if (!passes_frame_filter(s, frame_filter)) continue;
        if (auto hit = intersect_splat(ray, s, idx)) {
          if (!best || hit_less(*hit, *best)) {
            best = hit;
            best_t = hit->t;
          }
        }
      }
      continue;
    }
    const double tl = slab_entry(nodes[node.left].box, slab);
    const double tr = slab_entry(nodes[node.right].box, slab);
    const Entry l{node.left, tl}, r{node.right, tr};
    const Entry& near = tl <= tr ? l : r;
    const Entry& far = tl <= tr ? r : l;
    if (!std::isinf(far.t)) stack[top++] = far;
    if (!std::isinf(near.t)) stack[top++] = near;
  }
  return best;
}

std::vector<Hit> bvh_all_hits(const Bvh& bvh, const SplatSet& set, const Ray& ray,
                              std::optional<FrameId> frame_filter) {
  std::vector<Hit> hits;
  const auto& nodes = bvh.nodes();
  if (nodes.empty()) return hits;
  const SlabRay slab = make_slab_ray(ray);
  std::int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Bvh::Node& node = nodes[stack[--top]];
    if (std::isinf(slab_entry(node.box, slab))) continue;
    if (node.is_leaf()) {
      for (std::uint32_t i = 0; i < node.count; ++i) {
        const std::uint32_t idx = bvh.order()[node.begin + i];
        const Splat& s = set.splats[idx];
        if (!passes_frame_filter(s, frame_filter)) continue;
        if (auto hit = intersect_splat(ray, s, idx)) hits.push_back(*hit);
      }
      continue;
    }
    stack[top++] = node.right;
    stack[top++] = node.left;
  }
  std::sort(hits.begin(), hits.end(), hit_less);
  return hits;
}

std::optional<Hit> brute_force_first_hit(const SplatSet& set, const Ray& ray,
                                         std::optional<FrameId> frame_filter) {
  std::optional<Hit> best;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (!passes_frame_filter(set.splats[i], frame_filter)) continue;
    if (auto hit = intersect_splat(ray, set.splats[i], i)) {
      if (!best || hit_less(*hit, *best)) best = hit;
    }
  }
  return best;
}

std::vector<Hit> brute_force_all_hits(const SplatSet& set, const Ray& ray,
                                      std::optional<FrameId> frame_filter) {
  std::vector<Hit> hits;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (!passes_frame_filter(set.splats[i], frame_filter)) continue;
    if (auto hit = intersect_splat(ray, set.splats[i], i)) hits.push_back(*hit);
  }
  std::sort(hits.begin(), hits.end(), hit_less);
  return hits;
}

}  // namespace splatsim
