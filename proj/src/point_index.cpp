#include "splatsim/point_index.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <limits>
#include <queue>

namespace splatsim {

namespace {

constexpr std::uint32_t kLeafSize = 8;

struct Candidate {
  double d2;
  std::size_t index;
  bool operator<(const Candidate& o) const {
    return d2 < o.d2 || (d2 == o.d2 && index < o.index);
  }
};

double box_distance2(const Eigen::AlignedBox3d& box, const Vec3& q) {
  const Vec3 below = (box.min() - q).cwiseMax(0.0);
  const Vec3 above = (q - box.max()).cwiseMax(0.0);
  return below.squaredNorm() + above.squaredNorm();
}

std::vector<Neighbor> to_neighbors(std::vector<Candidate>& found) {
  std::sort(found.begin(), found.end());
  std::vector<Neighbor> out;
  out.reserve(found.size());
  for (const auto& c : found) out.push_back({c.index, std::sqrt(c.d2)});
  return out;
}

}  // namespace

PointIndex::PointIndex(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  if (points_.size() >= std::numeric_limits<std::uint32_t>::max())
    throw InvalidArgument("point index supports fewer than 2^32 points");
  order_.resize(points_.size());
  for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
  if (!points_.empty()) build(0, static_cast<std::uint32_t>(points_.size()));
  ordered_.reserve(points_.size());
  for (auto i : order_) ordered_.push_back(points_[i]);
}

std::int32_t PointIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({});
  Eigen::AlignedBox3d box;
  for (std::uint32_t i = begin; i < end; ++i) box.extend(points_[order_[i]]);
  nodes_[id].box = box;
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  if (end - begin <= kLeafSize) return id;

  Eigen::Index axis = 0;
  box.sizes().maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ca = points_[a][axis], cb = points_[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

// visit(d2, index) is called for every point in every node the pruning bound
// admits; bound() returns the current squared pruning distance.
template <typename Visit>
void PointIndex::search(const Vec3& query, Visit&& visit) const {
  if (nodes_.empty()) return;
  std::int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (box_distance2(node.box, query) > visit.bound()) continue;
    if (node.left < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i)
        visit((ordered_[i] - query).squaredNorm(), order_[i]);
      continue;
    }
    const double dl = box_distance2(nodes_[node.left].box, query);
    const double dr = box_distance2(nodes_[node.right].box, query);
    // Push the farther child first so the nearer one is popped next.
    if (dl <= dr) {
      stack[top++] = node.right;
      stack[top++] = node.left;
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
}

std::vector<Neighbor> PointIndex::knn(const Vec3& query, std::size_t k,
                                      std::optional<std::size_t> exclude) const {
  if (k == 0) return {};
  struct Visitor {
    std::size_t k;
    std::optional<std::size_t> exclude;
    std::priority_queue<Candidate> heap;
    double bound() const {
      return heap.size() < k ? std::numeric_limits<double>::infinity() : heap.top().d2;
    }
    void operator()(double d2, std::size_t idx) {
      if (exclude && idx == *exclude) return;
      const Candidate c{d2, idx};
      if (heap.size() < k) {
        heap.push(c);
      } else if (c < heap.top()) {
        heap.pop();
        heap.push(c);
      }
    }
  } visitor{k, exclude, {}};
  search(query, visitor);
  std::vector<Candidate> found;
  found.reserve(visitor.heap.size());
  while (!visitor.heap.empty()) {
    found.push_back(visitor.heap.top());
    visitor.heap.pop();
  }
  return to_neighbors(found);
}

std::vector<Neighbor> PointIndex::within(const Vec3& query, double radius,
                                         std::optional<std::size_t> exclude) const {
  struct Visitor {
    double r2;
    std::optional<std::size_t> exclude;
    std::vector<Candidate> found;
    double bound() const { return r2; }
    void operator()(double d2, std::size_t idx) {
      if (d2 <= r2 && !(exclude && idx == *exclude)) found.push_back({d2, idx});
    }
  } visitor{radius * radius, exclude, {}};
  search(query, visitor);
  return to_neighbors(visitor.found);
}

std::size_t PointIndex::count_within(const Vec3& query, double radius) const {
  struct Visitor {
    double r2;
    std::size_t count = 0;
    double bound() const { return r2; }
    void operator()(double d2, std::size_t) {
      if (d2 <= r2) ++count;
    }
  } visitor{radius * radius};
  search(query, visitor);
  return visitor.count;
}

Neighbor PointIndex::nearest(const Vec3& query) const {
  if (points_.empty()) throw InvalidArgument("nearest() on an empty index");
  return knn(query, 1).front();
}

PointIndex build_point_index(const PointCloud& cloud) {
  if (cloud.empty()) throw InvalidArgument("cannot index an empty cloud");
  return PointIndex(cloud.positions);
}

std::vector<Neighbor> restricted_neighborhood(const PointIndex& index, std::size_t point,
                                              std::size_t k, double radius) {
  return restricted_neighborhood(index, index.point(point), k, radius, point);
}

std::vector<Neighbor> restricted_neighborhood(const PointIndex& index, const Vec3& position,
                                              std::size_t k, double radius,
                                              std::optional<std::size_t> exclude) {
  auto nn = index.knn(position, k, exclude);
  const auto beyond = std::find_if(nn.begin(), nn.end(),
                                   [radius](const Neighbor& n) { return n.distance > radius; });
  nn.erase(beyond, nn.end());
  return nn;
}

}  // namespace splatsim
