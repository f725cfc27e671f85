#include "splatsim/evaluate.hpp"
#include "splatsim/resample.hpp"
#include "splatsim/synth.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace splatsim;

namespace {

PointCloud grid(int n, double spacing, double z = 0.0, Vec3 offset = Vec3::Zero()) {
  PointCloud c;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c.positions.push_back(offset + Vec3(i * spacing, j * spacing, z));
  return c;
}

double brute_c2c(const PointCloud& sim, const PointCloud& ori) {
  double sum = 0;
  for (const auto& p : sim.positions) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : ori.positions) best = std::min(best, (p - q).norm());
    sum += best;
  }
  return sum / static_cast<double>(sim.size());
}

PointCloud with_labels(PointCloud c, std::mt19937_64& rng, int classes) {
  std::uniform_int_distribution<int> pick(1, classes);
  std::vector<ClassId> labels;
  for (std::size_t i = 0; i < c.size(); ++i) labels.push_back(static_cast<ClassId>(pick(rng)));
  c.labels = labels;
  return c;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("c2c of a cloud against itself is zero") {
  const auto c = testing::random_cloud(2000, 11);
  CHECK(c2c_distance(c, c) == 0.0);
}

TEST_CASE("c2c between parallel grids equals their offset") {
  const auto a = grid(30, 0.1);
  const auto b = grid(30, 0.1, 0.25);
  CHECK(c2c_distance(a, b) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(c2c_to_plane(b, Eigen::Hyperplane<double, 3>(Vec3::UnitZ(), 0.0)) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("c2c is asymmetric") {
  const auto full = grid(20, 0.1);
  std::vector<std::size_t> half;
  for (std::size_t i = 0; i < full.size() / 2; ++i) half.push_back(i);
  const auto sub = select(full, half);
  CHECK(c2c_distance(sub, full) == 0.0);
  CHECK(c2c_distance(full, sub) > 0.1);
}

TEST_CASE("c2c matches a double loop") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto sim = testing::random_cloud(1500, seed, 2.0);
    const auto ori = testing::random_cloud(3000, seed + 100, 2.0);
    CHECK(std::abs(c2c_distance(sim, ori) - brute_c2c(sim, ori)) <= 1e-12);
  }
}

TEST_CASE("c2c rejects empty clouds") {
  const auto c = testing::random_cloud(10, 1);
  CHECK_THROWS_AS(c2c_distance(PointCloud{}, c), InvalidArgument);
  CHECK_THROWS_AS(c2c_distance(c, PointCloud{}), InvalidArgument);
  CHECK_THROWS_AS(c2c_to_plane(PointCloud{}, Eigen::Hyperplane<double, 3>(Vec3::UnitZ(), 0.0)), InvalidArgument);
}

TEST_CASE("c2c to a tilted plane") {
  const Vec3 n = Vec3(1, 2, 2).normalized();
  const Eigen::Hyperplane<double, 3> plane(n, -1.5);
  std::mt19937_64 rng(5);
  PointCloud c;
  double expected = 0;
  for (int i = 0; i < 500; ++i) {
    const Vec3 p = testing::uniform_vec(rng, -3, 3);
    c.positions.push_back(p);
    expected += std::abs(n.dot(p) - 1.5);
  }
  CHECK(c2c_to_plane(c, plane) == doctest::Approx(expected / 500).epsilon(1e-12));
}

TEST_CASE("per-class c2c") {
  std::mt19937_64 rng(9);

  SUBCASE("a single class equals the global value") {
    auto sim = testing::random_cloud(800, 1);
    auto ori = testing::random_cloud(1200, 2);
    sim.labels = std::vector<ClassId>(sim.size(), 4);
    ori.labels = std::vector<ClassId>(ori.size(), 4);
    const std::vector<ClassId> classes{4};
    const auto t = c2c_per_class(sim, ori, classes);
    REQUIRE(t.size() == 1);
    CHECK(t[0].present);
    CHECK(t[0].count == 800);
    CHECK(t[0].mean == c2c_distance(sim, ori));
  }

  SUBCASE("restricted to matching labels") {
    const auto sim = with_labels(testing::random_cloud(1000, 3), rng, 3);
    const auto ori = with_labels(testing::random_cloud(1500, 4), rng, 3);
    const std::vector<ClassId> classes{1, 2, 3, 9};
    const auto t = c2c_per_class(sim, ori, classes);
    REQUIRE(t.size() == 4);
    for (int k = 0; k < 3; ++k) {
      std::vector<std::size_t> si, oi;
      for (std::size_t i = 0; i < sim.size(); ++i)
        if ((*sim.labels)[i] == classes[k]) si.push_back(i);
      for (std::size_t i = 0; i < ori.size(); ++i)
        if ((*ori.labels)[i] == classes[k]) oi.push_back(i);
      CHECK(t[k].present);
      CHECK(t[k].count == si.size());
      CHECK(std::abs(t[k].mean - brute_c2c(select(sim, si), select(ori, oi))) <= 1e-12);
    }
    CHECK_FALSE(t[3].present);
    CHECK(t[3].count == 0);
  }

  SUBCASE("class missing from the original") {
    auto sim = testing::random_cloud(50, 5);
    auto ori = testing::random_cloud(50, 6);
    sim.labels = std::vector<ClassId>(50, 2);
    ori.labels = std::vector<ClassId>(50, 1);
    const std::vector<ClassId> classes{2};
    const auto t = c2c_per_class(sim, ori, classes);
    CHECK_FALSE(t[0].present);
    CHECK(t[0].count == 50);
  }

  SUBCASE("labels required") {
    const auto c = testing::random_cloud(10, 1);
    const std::vector<ClassId> classes{1};
    CHECK_THROWS_AS(c2c_per_class(c, c, classes), InvalidArgument);
  }
}

TEST_CASE("density statistics") {
  SUBCASE("regular grid interior") {
    // border points have 2 or 3 neighbors, interior points 4
    const auto g = grid(40, 0.1);
    const auto s = density_stats(g, 0.105);
    CHECK(s.mean > 3.5);
    CHECK(s.mean <= 4.0);
    CHECK(s.cv < 0.1);
  }

  SUBCASE("brute-force counts") {
    const auto c = testing::random_cloud(1500, 8);
    const double r = 0.2;
    std::vector<double> counts;
    for (const auto& p : c.positions) {
      int n = -1;
      for (const auto& q : c.positions) n += (p - q).norm() <= r;
      counts.push_back(n);
    }
    double mean = 0;
    for (double x : counts) mean += x;
    mean /= counts.size();
    double var = 0;
    for (double x : counts) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / counts.size());
    const auto s = density_stats(c, r);
    CHECK(s.mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(s.stddev == doctest::Approx(sd).epsilon(1e-12));
    CHECK(s.cv == doctest::Approx(sd / mean).epsilon(1e-12));
  }

  SUBCASE("mixed density has a large CV") {
    auto dense = grid(30, 0.05);
    const auto sparse = grid(15, 0.1, 0.0, Vec3(2.0, 0, 0));
    dense.positions.insert(dense.positions.end(), sparse.positions.begin(), sparse.positions.end());
    CHECK(density_stats(dense, 0.12).cv > 0.3);
  }

  SUBCASE("disjoint rigid copy leaves the statistics unchanged") {
    const auto c = testing::random_cloud(1000, 12);
    auto twice = c;
    for (const auto& p : c.positions) twice.positions.push_back(p + Vec3(100, 0, 0));
    const auto a = density_stats(c, 0.25);
    const auto b = density_stats(twice, 0.25);
    CHECK(b.mean == doctest::Approx(a.mean).epsilon(1e-12));
    CHECK(b.cv == doctest::Approx(a.cv).epsilon(1e-12));
  }

  SUBCASE("empty cloud and bad radius") {
    CHECK(density_stats(PointCloud{}, 1.0).mean == 0.0);
    CHECK_THROWS_AS(density_stats(grid(3, 1.0), 0.0), InvalidArgument);
  }
}

TEST_CASE("coverage") {
  const auto g = grid(20, 0.1);

  SUBCASE("empty set covers nothing") { CHECK(coverage_fraction(SplatSet{}, g, 0.01) == 0.0); }

  SUBCASE("one large disk covers everything") {
    SplatSet set;
    Splat s;
    s.center = Vec3(0.95, 0.95, 0);
    s.radius = 2.0;
    set.splats.push_back(s);
    CHECK(coverage_fraction(set, g, 0.01) == 1.0);
  }

  SUBCASE("disk out of tolerance or too small") {
    SplatSet set;
    Splat s;
    s.center = Vec3(0.95, 0.95, 0.05);
    s.radius = 2.0;
    set.splats.push_back(s);
    CHECK(coverage_fraction(set, g, 0.01) == 0.0);
    CHECK(coverage_fraction(set, g, 0.06) == 1.0);
    set.splats[0].center.z() = 0;
    set.splats[0].radius = 0.001;
    set.splats[0].center = Vec3(0, 0, 0);
    CHECK(coverage_fraction(set, g, 0.01) == doctest::Approx(1.0 / 400));
  }

  SUBCASE("generated splats cover their own cloud") {
    synth::PlaneOptions o;
    o.count = 20000;
    o.extent = 6.0;
    const auto part = map_semantic_groups(synth::plane(o), synth::mapping_for("plane"));
    PipelineConfig cfg;
    cfg.variant = Variant::AdaSemantic;
    cfg.resample = false;
    const auto r = run_adaptive_pipeline(part.static_cloud, cfg);
    CHECK(coverage_fraction(r.splats, r.cloud, 1e-6) >= 0.99);
  }

  CHECK_THROWS_AS(coverage_fraction(SplatSet{}, g, 0.0), InvalidArgument);
}

TEST_CASE("report formats") {
  EvalReport r;
  r.sim_points = 10;
  r.ori_points = 20;
  r.c2c = 0.125;
  r.c2c_plane = 0.5;
  r.per_class = {{1, true, 0.25, 7}, {2, false, 0, 3}};
  r.density = DensitySummary{4.0, 1.0, 0.25};
  r.coverage = 0.75;
  r.timings = {{"load", 0.5}, {"c2c", 1.25}};

  const auto rows = parse_csv(report_csv(r));
  REQUIRE(rows.size() == 9);
  CHECK(rows[0] == std::vector<std::string>{"metric", "class", "value", "count"});
  CHECK(rows[1] == std::vector<std::string>{"c2c", "", "0.125", "10"});
  CHECK(rows[2] == std::vector<std::string>{"c2c_plane", "", "0.5", "10"});
  CHECK(rows[3] == std::vector<std::string>{"c2c_class", "1", "0.25", "7"});
  CHECK(rows[4] == std::vector<std::string>{"c2c_class", "2", "absent", "3"});
  CHECK(rows[7][0] == "density_cv");
  CHECK(rows[7][2] == "0.25");
  CHECK(rows[8] == std::vector<std::string>{"coverage", "", "0.75", "20"});
  for (const auto& row : rows) CHECK(row.size() == 4);

  const auto t = parse_csv(timings_csv(r));
  REQUIRE(t.size() == 3);
  CHECK(t[0] == std::vector<std::string>{"stage", "seconds"});
  CHECK(t[2] == std::vector<std::string>{"c2c", "1.25"});

  // full precision survives a text round trip
  EvalReport p;
  p.c2c = 0.1 + 0.2;
  const auto pr = parse_csv(report_csv(p));
  CHECK(std::stod(pr[1][2]) == p.c2c);

  CHECK(report_summary(r).find("absent") != std::string::npos);
}
