#include "splatsim/resample.hpp"

#include "splatsim/evaluate.hpp"
#include "splatsim/synth.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace splatsim;

namespace {

// Grid on z = 0 with heights alternating +-a in a checkerboard.
PointCloud checkerboard(int n, double spacing, double a) {
  PointCloud c;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c.positions.emplace_back(i * spacing, j * spacing, (i + j) % 2 ? a : -a);
  c.sensor_positions = std::vector<Vec3>(c.size(), Vec3(n * spacing / 2, n * spacing / 2, 20));
  return c;
}

// The outlier rule evaluated with linear scans.
std::vector<std::uint8_t> oracle_marks(const PointCloud& c, const ScaleStats& s) {
  std::vector<std::uint8_t> marks(c.size(), 0);
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!c.has_normal(i)) continue;
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t j = 0; j < c.size(); ++j)
      if (j != i) order.emplace_back((c.positions[j] - c.positions[i]).norm(), j);
    std::sort(order.begin(), order.end());
    std::vector<std::pair<double, std::size_t>> eps;
    for (std::size_t m = 0; m < s.k && m < order.size() && order[m].first <= s.r_bar; ++m)
      eps.emplace_back(std::abs((*c.normals)[i].dot(c.positions[order[m].second] - c.positions[i])), order[m].second);
    if (eps.size() < 2) continue;
    double mean = 0, var = 0;
    for (auto& e : eps) mean += e.first;
    mean /= static_cast<double>(eps.size());
    for (auto& e : eps) var += (e.first - mean) * (e.first - mean);
    const double sd = std::sqrt(var / static_cast<double>(eps.size()));
    if (sd <= 1e-12 * std::max(1.0, s.r_bar)) continue;
    for (auto& e : eps)
      if (e.first > mean + 3 * sd) marks[e.second] = 1;
  }
  return marks;
}

Splat flat_splat(Vec3 c, SurfaceGroup g = SurfaceGroup::Surface) {
  Splat s;
  s.center = c;
  s.normal = Vec3::UnitZ();
  s.radius = 0.1;
  s.group = g;
  return s;
}

SplatSet set_from_centers(const std::vector<Vec3>& centers, PointCloud& cloud) {
  SplatSet set;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    set.splats.push_back(flat_splat(centers[i]));
    set.seeds.push_back(i);
  }
  cloud.positions = centers;
  cloud.labels = std::vector<ClassId>(centers.size(), 5);
  return set;
}

}  // namespace

TEST_CASE("exact plane loses nothing to denoising") {
  const PreparedCloud p = prepare_cloud(checkerboard(30, 0.1, 0.0), 20, {}, false);
  const PointCloud out = denoise(p.cloud, p.index, p.stats);
  CHECK(out.size() == p.cloud.size());
}

TEST_CASE("a far outlier is removed, and a second pass removes nothing") {
  PointCloud c = checkerboard(24, 0.5, 0.001);
  c.positions.push_back(Vec3(6.1, 6.1, 1.0));
  c.sensor_positions->push_back(Vec3(6, 6, 20));
  const PreparedCloud p = prepare_cloud(c, 40, {}, false);
  REQUIRE(p.stats.r_bar > 1.0);
  const auto marks = outlier_marks(p.cloud, p.index, p.stats);
  CHECK(marks == oracle_marks(p.cloud, p.stats));
  CHECK(marks.back() == 1);
  const PointCloud once = denoise(p.cloud, p.index, p.stats);
  CHECK(once.size() == c.size() - 1);
  for (const Vec3& q : once.positions) CHECK(std::abs(q.z()) <= 0.001);

  const PreparedCloud again = prepare_cloud(once, 40, {}, false);
  CHECK(denoise(again.cloud, again.index, again.stats).size() == once.size());
}

TEST_CASE("outlier marks match the rule on a noisy cloud") {
  synth::PlaneOptions o;
  o.count = 2500;
  o.extent = 5;
  o.noise_sigma = 0.01;
  PointCloud c = synth::plane(o);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    c.positions[static_cast<std::size_t>(i) * 100].z() += 0.2;
  }
  const PreparedCloud p = prepare_cloud(c, 30, {}, false);
  const auto marks = outlier_marks(p.cloud, p.index, p.stats);
  CHECK(marks == oracle_marks(p.cloud, p.stats));
  const PointCloud out = denoise(p.cloud, p.index, p.stats);
  CHECK(out.size() < c.size());
  for (int i = 0; i < 20; ++i) CHECK(marks[static_cast<std::size_t>(i) * 100] == 1);
}

TEST_CASE("density counts") {
  const ScaleStats stats{1.0, 0, 40};
  SUBCASE("single splat") {
    SplatSet set;
    set.splats.push_back(flat_splat(Vec3::Zero()));
    const auto d = compute_density(set, stats);
    CHECK(d.counts[0] == 0);
    CHECK(d.mean == 0);
  }
  SUBCASE("two centers within R-bar") {
    SplatSet set;
    set.splats.push_back(flat_splat(Vec3::Zero()));
    set.splats.push_back(flat_splat(Vec3(0.5, 0, 0)));
    const auto d = compute_density(set, stats);
    CHECK(d.counts == std::vector<std::size_t>{1, 1});
    CHECK(d.mean == 1);
  }
  SUBCASE("random set against brute-force ball counts") {
    std::mt19937_64 rng(8);
    SplatSet set;
    for (int i = 0; i < 1500; ++i)
      set.splats.push_back(flat_splat(testing::uniform_vec(rng, -4, 4),
                                      i % 5 == 0 ? SurfaceGroup::NonSurface : SurfaceGroup::Surface));
    const auto d = compute_density(set, stats);
    double total = 0;
    std::size_t eligible = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
      const bool ok = set.splats[i].group != SurfaceGroup::NonSurface;
      CHECK(d.eligible[i] == ok);
      if (!ok) continue;
      std::size_t count = 0;
      for (std::size_t j = 0; j < set.size(); ++j)
        if (j != i && set.splats[j].group != SurfaceGroup::NonSurface &&
            (set.splats[j].center - set.splats[i].center).norm() <= 1.0)
          ++count;
      CHECK(d.counts[i] == count);
      total += static_cast<double>(count);
      ++eligible;
    }
    CHECK(d.mean == doctest::Approx(total / static_cast<double>(eligible)).epsilon(1e-14));
  }
}

TEST_CASE("resampling with no sparse splat is a no-op") {
  PointCloud cloud;
  SplatSet set = set_from_centers({Vec3::Zero(), Vec3(0.5, 0, 0)}, cloud);
  GenConfig cfg;
  cfg.stats = {1.0, 0, 40};
  const auto out = resample_cloud(cloud, set, compute_density(set, cfg.stats), cfg);
  CHECK(out.positions == cloud.positions);
}

TEST_CASE("a sparse splat gains the midpoint toward its farthest compatible neighbor") {
  PointCloud cloud;
  SplatSet set = set_from_centers({Vec3::Zero(), Vec3(1, 0, 0), Vec3(1.1, 0, 0), Vec3(1.2, 0, 0)}, cloud);
  GenConfig cfg;
  cfg.stats = {1.05, 0, 40};
  const auto density = compute_density(set, cfg.stats);
  CHECK(density.counts == std::vector<std::size_t>{1, 3, 2, 2});
  const auto out = resample_cloud(cloud, set, density, cfg);
  REQUIRE(out.size() == 5);
  const Vec3 mid = out.positions[4];
  CHECK(mid == Vec3(0.5, 0, 0));
  CHECK((mid - set.splats[0].center).norm() == (mid - set.splats[1].center).norm());
  CHECK((*out.labels)[4] == 5);
  CHECK_FALSE(out.normals.has_value());
}

TEST_CASE("resampling respects the class and smoothness checks") {
  PointCloud cloud;
  SplatSet set = set_from_centers({Vec3::Zero(), Vec3(1, 0, 0), Vec3(1.1, 0, 0), Vec3(1.2, 0, 0)}, cloud);
  GenConfig cfg;
  cfg.stats = {1.05, 0, 40};
  set.splats[1].normal = Vec3(0, 0.8, 0.6);  // dot 0.6 fails beta
  CHECK(resample_cloud(cloud, set, compute_density(set, cfg.stats), cfg).size() == 4);
  set.splats[1].normal = Vec3::UnitZ();
  set.splats[1].group = SurfaceGroup::Ground;
  CHECK(resample_cloud(cloud, set, compute_density(set, cfg.stats), cfg).size() == 4);
}

TEST_CASE("new points are exact midpoints of compatible splats, originals untouched") {
  // Sweep lines drifting apart with range: a dense band next to sparse strips.
  synth::ScanlineOptions o;
  o.lines = 30;
  o.line_spacing = 0.05;
  o.point_spacing = 0.01;
  o.length = 3;
  o.spacing_growth = 1.08;
  const PointCloud raw = synth::scanlines(o);
  PreparedCloud p = prepare_cloud(raw, 40, {}, true);
  GenConfig cfg;
  cfg.variant = Variant::AdaDescr;
  cfg.stats = p.stats;
  const SplatSet set = generate_splats(p.cloud, p.index, cfg);
  const auto density = compute_density(set, p.stats);
  const PointCloud out = resample_cloud(p.cloud, set, density, cfg);
  REQUIRE(out.size() > p.cloud.size());
  for (std::size_t i = 0; i < p.cloud.size(); ++i) CHECK(out.positions[i] == p.cloud.positions[i]);
  std::vector<Vec3> centers;
  for (const auto& s : set.splats) centers.push_back(s.center);
  const PointIndex ci(centers);
  for (std::size_t i = p.cloud.size(); i < out.size(); ++i) {
    const Vec3& q = out.positions[i];
    bool found = false;
    for (const auto& a : ci.within(q, p.stats.r_bar)) {
      for (const auto& b : ci.within(q, p.stats.r_bar)) {
        const Splat& sa = set.splats[a.index];
        const Splat& sb = set.splats[b.index];
        if (a.index == b.index || (sa.center + sb.center) / 2.0 != q) continue;
        if (sa.group == sb.group && sa.normal.dot(sb.normal) > cfg.beta &&
            sa.group != SurfaceGroup::NonSurface)
          found = true;
      }
    }
    CHECK(found);
  }
  // Density of the augmented cloud is more uniform.
  const double radius = p.stats.r_bar;
  CHECK(density_stats(out, radius).cv < density_stats(p.cloud, radius).cv);
}

TEST_CASE("no midpoint crosses a sharp two-class edge") {
  synth::DihedralOptions o;
  o.count_per_face = 3000;
  o.extent = 3;
  PointCloud raw = synth::dihedral(o);
  const auto part = map_semantic_groups(raw, synth::mapping_for("dihedral"));
  PipelineConfig cfg;
  cfg.variant = Variant::AdaSemantic;
  const PipelineResult r = run_adaptive_pipeline(part.static_cloud, cfg);
  REQUIRE(r.resampled_points > 0);
  const std::size_t n0 = r.cloud.size() - r.resampled_points;
  const SplatSet& first = r.initial_splats;
  std::vector<Vec3> centers;
  for (const auto& sp : first.splats) centers.push_back(sp.center);
  const PointIndex ci(centers);
  for (std::size_t i = n0; i < r.cloud.size(); ++i) {
    const Vec3& q = r.cloud.positions[i];
    const ClassId label = (*r.cloud.labels)[i];
    // Find the parent pair; both must carry the new point's class.
    std::size_t pairs = 0;
    const auto near = ci.within(q, 2 * r.final_stats.r_bar + 1.0);
    for (const auto& a : near)
      for (const auto& b : near) {
        if (a.index >= b.index) continue;
        const Splat& sa = first.splats[a.index];
        const Splat& sb = first.splats[b.index];
        if ((sa.center + sb.center) / 2.0 != q) continue;
        ++pairs;
        CHECK(sa.label == label);
        CHECK(sb.label == label);
      }
    CHECK(pairs >= 1);
    // The new point stays on its own face, up to the splat offsets near the edge.
    if (label == synth::kGroundClass) CHECK(std::abs(q.z()) < 0.05);
    else CHECK(std::abs(q.x()) < 0.05);
  }
}

TEST_CASE("pipeline on an exact plane covers it") {
  synth::PlaneOptions o;
  o.count = 20000;
  o.extent = 10;
  const PointCloud plane = synth::plane(o);
  for (Variant v : {Variant::Basic, Variant::AdaDescr}) {
    PipelineConfig cfg;
    cfg.variant = v;
    const PipelineResult r = run_adaptive_pipeline(plane, cfg);
    REQUIRE(!r.splats.empty());
    for (const auto& s : r.splats.splats) {
      CHECK(std::abs(s.center.z()) < 1e-12);
      CHECK(std::abs(std::abs(s.normal.z()) - 1) < 1e-12);
    }
    CHECK(coverage_fraction(r.splats, plane, 1e-9) >= 0.95);
  }
}

TEST_CASE("pipeline is deterministic and reports its stages") {
  synth::PlaneOptions o;
  o.count = 5000;
  o.extent = 5;
  o.noise_sigma = 0.01;
  const PointCloud plane = synth::plane(o);
  PipelineConfig cfg;
  const auto a = run_adaptive_pipeline(plane, cfg);
  const auto b = run_adaptive_pipeline(plane, cfg);
  REQUIRE(a.splats.size() == b.splats.size());
  for (std::size_t i = 0; i < a.splats.size(); ++i) {
    CHECK(a.splats.splats[i].center == b.splats.splats[i].center);
    CHECK(a.splats.splats[i].radius == b.splats.splats[i].radius);
  }
  CHECK(a.cloud.positions == b.cloud.positions);
  CHECK(a.denoised_points <= plane.size());
  std::vector<std::string> stages;
  for (const auto& [stage, seconds] : a.timings) stages.push_back(stage);
  CHECK(stages == std::vector<std::string>{"denoise", "features", "generate", "resample", "features_resampled",
                                           "generate_resampled"});
}

TEST_CASE("pipeline rejects an empty cloud and a semantic run without groups") {
  CHECK_THROWS_AS(run_adaptive_pipeline(PointCloud{}, PipelineConfig{}), InvalidArgument);
  PipelineConfig cfg;
  cfg.variant = Variant::AdaSemantic;
  CHECK_THROWS_AS(run_adaptive_pipeline(testing::random_cloud(100, 1), cfg), ConfigError);
}
