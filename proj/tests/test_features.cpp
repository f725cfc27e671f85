#include "splatsim/features.hpp"

#include "support.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <numbers>

using namespace splatsim;

namespace {

// Closed-form eigenvalues of a symmetric 3x3 matrix (trigonometric method),
// returned in descending order.
Vec3 trig_eigenvalues(const Mat3& a) {
  const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
  const double q = a.trace() / 3;
  if (p1 == 0) {
    Vec3 d = a.diagonal();
    std::sort(d.data(), d.data() + 3, std::greater<>());
    return d;
  }
  const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) + (a(2, 2) - q) * (a(2, 2) - q) + 2 * p1;
  const double p = std::sqrt(p2 / 6);
  const Mat3 b = (a - q * Mat3::Identity()) / p;
  const double r = std::clamp(b.determinant() / 2, -1.0, 1.0);
  const double phi = std::acos(r) / 3;
  const double e1 = q + 2 * p * std::cos(phi);
  const double e3 = q + 2 * p * std::cos(phi + 2 * std::numbers::pi / 3);
  return Vec3(e1, 3 * q - e1 - e3, e3);
}

PointCloud grid_plane(int n, double spacing, Vec3 sensor) {
  PointCloud c;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c.positions.emplace_back(i * spacing, j * spacing, 0);
  c.sensor_positions = std::vector<Vec3>(c.size(), sensor);
  return c;
}

}  // namespace

TEST_CASE("pca of an exact plane and an exact line") {
  const std::vector<Vec3> square{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
  const PcaFrame f = neighborhood_pca(square);
  CHECK(f.eigenvalues[2] == 0);
  CHECK(f.normal().isApprox(Vec3::UnitZ(), 1e-12));  // sign convention: first nonzero component positive
  CHECK(f.centroid.isApprox(Vec3(0.5, 0.5, 0)));

  const std::vector<Vec3> line{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2.5, 0, 0), Vec3(-3, 0, 0)};
  const PcaFrame l = neighborhood_pca(line);
  CHECK(l.eigenvalues[1] == doctest::Approx(0).epsilon(1e-15));
  CHECK(l.eigenvalues[2] == doctest::Approx(0).epsilon(1e-15));
  CHECK(l.axes.col(0).isApprox(Vec3::UnitX(), 1e-12));
}

TEST_CASE("pca eigenvalues match the closed-form oracle") {
  std::mt19937_64 rng(123);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    const Mat3 shape = Mat3::Random() * 2;
    Eigen::Matrix3Xd pts(3, 30);
    for (int i = 0; i < 30; ++i) {
      const double x = g(rng), y = g(rng), z = g(rng);
      pts.col(i) = shape * Vec3(x, y, z) + Vec3(5, -2, 1);
    }
    const PcaFrame f = neighborhood_pca(pts);
    const Eigen::Matrix3Xd centered = pts.colwise() - pts.rowwise().mean();
    const Mat3 cov = centered * centered.transpose() / 30.0;
    const Vec3 expected = trig_eigenvalues(cov);
    for (int k = 0; k < 3; ++k) CHECK(f.eigenvalues[k] == doctest::Approx(expected[k]).epsilon(1e-9).scale(cov.norm()));
    CHECK(f.eigenvalues[0] >= f.eigenvalues[1]);
    CHECK(f.eigenvalues[1] >= f.eigenvalues[2]);
    CHECK((f.axes.transpose() * f.axes - Mat3::Identity()).norm() < 1e-6);
    for (int k = 0; k < 3; ++k) CHECK((cov * f.axes.col(k) - f.eigenvalues[k] * f.axes.col(k)).norm() < 1e-9 * (1 + cov.norm()));
  }
}

TEST_CASE("pca rejects degenerate input") {
  CHECK_THROWS_AS(neighborhood_pca(std::vector<Vec3>{Vec3::Zero(), Vec3::UnitX()}), DegenerateError);
  CHECK_THROWS_AS(neighborhood_pca(std::vector<Vec3>(5, Vec3(1, 2, 3))), DegenerateError);
}

TEST_CASE("descriptor examples") {
  const auto plane = eigen_descriptors(Vec3(1, 1, 0));
  CHECK(plane.planarity == 1);
  CHECK(descriptor_group(plane) == SurfaceGroup::GroundSurface);
  const auto line = eigen_descriptors(Vec3(1, 0, 0));
  CHECK(line.linearity == 1);
  CHECK(descriptor_group(line) == SurfaceGroup::Linear);
  const auto blob = eigen_descriptors(Vec3(1, 1, 1));
  CHECK(blob.sphericity == 1);
  CHECK(blob.linearity == 0);
  CHECK(blob.planarity == 0);
  CHECK(descriptor_group(blob) == SurfaceGroup::NonSurface);
  // Ties: linear beats planar beats spherical.
  CHECK(descriptor_group({0.5, 0.5, 0}) == SurfaceGroup::Linear);
  CHECK(descriptor_group({0, 0.5, 0.5}) == SurfaceGroup::GroundSurface);
  CHECK_THROWS_AS(eigen_descriptors(Vec3::Zero()), DegenerateError);
}

TEST_CASE("normals face the sensor") {
  PointCloud above = grid_plane(20, 0.1, Vec3(0, 0, 10));
  const PointIndex index = build_point_index(above);
  const ScaleStats stats{0.35, 0, 8};
  const PointCloud up = estimate_normals(above, index, stats);
  for (const Vec3& n : *up.normals) CHECK(n.isApprox(Vec3::UnitZ(), 1e-12));

  PointCloud below = above;
  below.sensor_positions = std::vector<Vec3>(below.size(), Vec3(0.5, 0.5, -3));
  const PointCloud down = estimate_normals(below, index, stats);
  for (const Vec3& n : *down.normals) CHECK(n.isApprox(-Vec3::UnitZ(), 1e-12));

  // Without sensors the default fallback orients up.
  PointCloud bare = above;
  bare.sensor_positions.reset();
  for (const Vec3& n : *estimate_normals(bare, index, stats).normals) CHECK(n.z() > 0);
}

TEST_CASE("isolated points are flagged without a normal") {
  PointCloud c = grid_plane(10, 0.1, Vec3(0, 0, 5));
  c.positions.push_back(Vec3(50, 50, 50));
  c.sensor_positions->push_back(Vec3(0, 0, 5));
  const PointIndex index = build_point_index(c);
  const PointCloud out = estimate_normals(c, index, ScaleStats{0.3, 0, 10});
  CHECK_FALSE(out.has_normal(c.size() - 1));
  CHECK(out.has_normal(0));
}

TEST_CASE("scale statistics") {
  SUBCASE("unit grid line, k = 1") {
    PointCloud c;
    for (int i = 0; i < 10; ++i) c.positions.emplace_back(i, 0, 0);
    const PointIndex index = build_point_index(c);
    CHECK(mean_knn_radius(c, index, 1) == 1);
  }
  SUBCASE("exact plane has zero error bound") {
    PointCloud c = grid_plane(30, 0.1, Vec3(0, 0, 5));
    const PointIndex index = build_point_index(c);
    const double r = mean_knn_radius(c, index, 10);
    c = estimate_normals(c, index, {r, 0, 10});
    CHECK(mean_plane_error(c, index, 10, r) == 0);
  }
  SUBCASE("noisy plane: brute-force recomputation and the half-normal mean") {
    const double sigma = 0.01;
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0, 30);
    std::normal_distribution<double> g(0, sigma);
    PointCloud c;
    for (int i = 0; i < 100000; ++i) {
      const double x = u(rng), y = u(rng);
      c.positions.emplace_back(x, y, g(rng));
    }
    c.sensor_positions = std::vector<Vec3>(c.size(), Vec3(15, 15, 10));
    const PointIndex index = build_point_index(c);
    const std::size_t k = 40;
    const double r = mean_knn_radius(c, index, k);
    c = estimate_normals(c, index, {r, 0, k});
    const ScaleStats stats = compute_scale_stats(c, index, k);
    CHECK(stats.r_bar == r);

    // Pooled pairs recomputed by linear scans on a subsample of seeds.
    double brute_total = 0;
    std::size_t brute_pairs = 0;
    double lib_total = 0;
    std::size_t lib_pairs = 0;
    for (std::size_t i = 0; i < c.size(); i += 997) {
      std::vector<std::pair<double, std::size_t>> d;
      for (std::size_t j = 0; j < c.size(); ++j)
        if (j != i) d.emplace_back((c.positions[j] - c.positions[i]).norm(), j);
      std::partial_sort(d.begin(), d.begin() + static_cast<long>(k), d.end());
      for (std::size_t m = 0; m < k; ++m) {
        if (d[m].first > r) break;
        brute_total += std::abs((*c.normals)[i].dot(c.positions[d[m].second] - c.positions[i]));
        ++brute_pairs;
      }
      for (const auto& nb : restricted_neighborhood(index, i, k, r)) {
        lib_total += std::abs((*c.normals)[i].dot(c.positions[nb.index] - c.positions[i]));
        ++lib_pairs;
      }
    }
    CHECK(brute_pairs == lib_pairs);
    CHECK(lib_total == doctest::Approx(brute_total).epsilon(1e-12));

    // Offsets between two independent N(0, sigma) heights: mean |z_k - z_i| = 2 sigma / sqrt(pi).
    const double analytic = 2 * sigma / std::sqrt(std::numbers::pi);
    CHECK(stats.e_bar == doctest::Approx(analytic).epsilon(0.05));
  }
}

TEST_CASE("descriptor classification of simple shapes") {
  PointCloud c;
  for (int i = 0; i < 15; ++i)
    for (int j = 0; j < 15; ++j) c.positions.emplace_back(0.1 * i, 0.1 * j, 0);
  const std::size_t plane_end = c.size();
  for (int i = 0; i < 60; ++i) c.positions.emplace_back(5, 5, 0.05 * i);
  const std::size_t line_end = c.size();
  std::mt19937_64 rng(2);
  for (int i = 0; i < 4000; ++i) c.positions.push_back(Vec3(10, 10, 10) + testing::uniform_vec(rng, -0.5, 0.5));
  const PointIndex index = build_point_index(c);
  const auto out = classify_by_descriptors(c, index, {0.5, 0, 20});
  const auto& g = *out.cloud.groups;
  // Grid borders see one-sided, elongated neighborhoods; the interior is planar.
  for (std::size_t i = 0; i < plane_end; ++i) {
    const Vec3& p = c.positions[i];
    if (p.x() > 0.35 && p.x() < 1.05 && p.y() > 0.35 && p.y() < 1.05) CHECK(g[i] == SurfaceGroup::GroundSurface);
  }
  for (std::size_t i = plane_end; i < line_end; ++i) CHECK(g[i] == SurfaceGroup::Linear);
  std::size_t inner = 0, spherical = 0;
  for (std::size_t i = line_end; i < c.size(); ++i) {
    if ((c.positions[i] - Vec3(10, 10, 10)).cwiseAbs().maxCoeff() > 0.3) continue;
    ++inner;
    spherical += g[i] == SurfaceGroup::NonSurface;
  }
  CHECK(spherical * 10 > inner * 6);
  CHECK(out.degenerate.empty());
}

TEST_CASE("rigid motion rotates normals and leaves descriptors and error bound alone") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0, 0.01);
  std::uniform_real_distribution<double> u(0, 3);
  PointCloud c;
  for (int i = 0; i < 3000; ++i) {
    const double x = u(rng), y = u(rng);
    c.positions.emplace_back(x, y, 0.2 * std::sin(x) + g(rng));
  }
  c.sensor_positions = std::vector<Vec3>(c.size(), Vec3(1.5, 1.5, 8));
  const Eigen::Isometry3d motion = Eigen::Translation3d(3, -7, 2) * Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized());
  PointCloud moved = c;
  for (auto& p : moved.positions) p = motion * p;
  for (auto& s : *moved.sensor_positions) s = motion * s;

  auto run = [](const PointCloud& in) {
    const PointIndex index = build_point_index(in);
    const double r = mean_knn_radius(in, index, 20);
    PointCloud out = estimate_normals(in, index, {r, 0, 20});
    const ScaleStats stats = compute_scale_stats(out, index, 20);
    return std::pair{out, stats};
  };
  const auto [a, sa] = run(c);
  const auto [b, sb] = run(moved);
  CHECK(sa.r_bar == doctest::Approx(sb.r_bar).epsilon(1e-9));
  CHECK(sa.e_bar == doctest::Approx(sb.e_bar).epsilon(1e-9));
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(((motion.linear() * (*a.normals)[i]) - (*b.normals)[i]).norm() < 1e-6);
    CHECK((*b.normals)[i].dot((*moved.sensor_positions)[i] - moved.positions[i]) >= 0);
  }
  const PointIndex ia = build_point_index(a), ib = build_point_index(b);
  const auto ca = classify_by_descriptors(a, ia, sa);
  const auto cb = classify_by_descriptors(b, ib, sb);
  CHECK(*ca.cloud.groups == *cb.cloud.groups);
  for (std::size_t i = 0; i < c.size(); i += 50) {
    const auto na = restricted_neighborhood(ia, i, 20, sa.r_bar);
    std::vector<Vec3> pa{a.positions[i]}, pb{b.positions[i]};
    for (const auto& n : na) {
      pa.push_back(a.positions[n.index]);
      pb.push_back(b.positions[n.index]);
    }
    const auto da = eigen_descriptors(neighborhood_pca(pa).eigenvalues);
    const auto db = eigen_descriptors(neighborhood_pca(pb).eigenvalues);
    CHECK(da.linearity == doctest::Approx(db.linearity).epsilon(1e-9));
    CHECK(da.planarity == doctest::Approx(db.planarity).epsilon(1e-9));
    CHECK(da.sphericity == doctest::Approx(db.sphericity).epsilon(1e-9));
  }
}
