#include "splatsim/resample.hpp"

#include "splatsim/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>

namespace splatsim {

std::vector<std::uint8_t> outlier_marks(const PointCloud& cloud, const PointIndex& index,
                                        const ScaleStats& stats) {
  if (!cloud.normals) throw InvalidArgument("denoising requires estimated normals");
  const std::size_t n = cloud.size();
  std::vector<std::vector<std::size_t>> local(n);
  const double sigma_floor = 1e-12 * std::max(1.0, stats.r_bar);
  parallel_for(n, [&](std::size_t i) {
    if (!cloud.has_normal(i)) return;
    const auto nbrs = restricted_neighborhood(index, i, stats.k, stats.r_bar);
    if (nbrs.size() < 2) return;
    const Vec3& normal = (*cloud.normals)[i];
    const Vec3& p = cloud.positions[i];
    std::vector<double> dist(nbrs.size());
    for (std::size_t j = 0; j < nbrs.size(); ++j)
      dist[j] = std::abs(normal.dot(cloud.positions[nbrs[j].index] - p));
    const double count = static_cast<double>(dist.size());
    double mean = 0;
    for (double d : dist) mean += d;
    mean /= count;
    double var = 0;
    for (double d : dist) var += (d - mean) * (d - mean);
    const double sigma = std::sqrt(var / count);
    if (sigma <= sigma_floor) return;
    for (std::size_t j = 0; j < dist.size(); ++j)
      if (dist[j] > mean + 3.0 * sigma) local[i].push_back(nbrs[j].index);
  });
  std::vector<std::uint8_t> marks(n, 0);
  for (const auto& l : local)
    for (std::size_t j : l) marks[j] = 1;
  return marks;
}

PointCloud denoise(const PointCloud& cloud, const PointIndex& index, const ScaleStats& stats) {
  const auto marks = outlier_marks(cloud, index, stats);
  std::vector<std::size_t> keep;
  keep.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (!marks[i]) keep.push_back(i);
  return select(cloud, keep);
}

DensityStats compute_density(const SplatSet& set, const ScaleStats& stats) {
  if (set.empty()) throw InvalidArgument("density of an empty splat set");
  DensityStats d;
  d.counts.assign(set.size(), 0);
  d.eligible.assign(set.size(), 0);
  std::vector<Vec3> centers;
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set.splats[i].group == SurfaceGroup::NonSurface) continue;
    d.eligible[i] = 1;
    centers.push_back(set.splats[i].center);
    ids.push_back(i);
  }
  if (centers.empty()) return d;
  const PointIndex index(centers);
  parallel_for(ids.size(), [&](std::size_t j) {
    d.counts[ids[j]] = index.count_within(centers[j], stats.r_bar) - 1;
  });
  double total = 0;
  for (std::size_t id : ids) total += static_cast<double>(d.counts[id]);
  d.mean = total / static_cast<double>(ids.size());
  return d;
}

namespace {

bool same_class(const Splat& a, const Splat& b, Variant variant) {
  if (variant == Variant::AdaSemantic && a.label && b.label) return *a.label == *b.label;
  return a.group == b.group;
}

// Hash grid for the 1e-9 m duplicate check among new points.
class DuplicateGrid {
 public:
  bool insert_if_new(const Vec3& p) {
    const auto key = cell(p);
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find(hash({key[0] + dx, key[1] + dy, key[2] + dz}));
          if (it == cells_.end()) continue;
          for (const Vec3& q : it->second)
            if ((q - p).norm() <= kTolerance) return false;
        }
    cells_[hash(key)].push_back(p);
    return true;
  }

 private:
  static constexpr double kTolerance = 1e-9;
  static constexpr double kCell = 1e-6;
  static std::array<long long, 3> cell(const Vec3& p) {
    return {static_cast<long long>(std::floor(p.x() / kCell)), static_cast<long long>(std::floor(p.y() / kCell)),
            static_cast<long long>(std::floor(p.z() / kCell))};
  }
  static std::uint64_t hash(const std::array<long long, 3>& k) {
    std::uint64_t h = 1469598103934665603ull;
    for (long long v : k) h = (h ^ static_cast<std::uint64_t>(v)) * 1099511628211ull;
    return h;
  }
  std::unordered_map<std::uint64_t, std::vector<Vec3>> cells_;
};

}  // namespace

PointCloud resample_cloud(const PointCloud& cloud, const SplatSet& set, const DensityStats& density,
                          const GenConfig& config, std::size_t max_per_splat) {
  if (set.seeds.size() != set.size())
    throw InvalidArgument("resampling needs splats generated in-process (seed indices missing)");
  if (density.counts.size() != set.size()) throw InvalidArgument("density does not match splat set");

  std::vector<Vec3> centers;
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (!density.eligible[i]) continue;
    centers.push_back(set.splats[i].center);
    ids.push_back(i);
  }
  if (centers.empty()) {
    PointCloud out = cloud;
    out.normals.reset();
    return out;
  }
  const PointIndex index(centers);
  const PointIndex original(cloud.positions);

  std::vector<Vec3> new_points;
  std::vector<std::size_t> parents;  // source point index for attribute inheritance
  DuplicateGrid grid;

  for (std::size_t j = 0; j < ids.size(); ++j) {
    const std::size_t i = ids[j];
    double delta = static_cast<double>(density.counts[i]);
    if (!(delta < density.mean)) continue;
    const Splat& si = set.splats[i];
    auto nbrs = index.within(si.center, config.stats.r_bar, j);
    std::sort(nbrs.begin(), nbrs.end(), [](const Neighbor& a, const Neighbor& b) {
      return a.distance > b.distance || (a.distance == b.distance && a.index < b.index);
    });
    std::size_t added = 0;
    for (const Neighbor& nb : nbrs) {
      if (delta >= density.mean || added >= max_per_splat) break;
      const Splat& sj = set.splats[ids[nb.index]];
      if (!same_class(si, sj, config.variant)) continue;
      if (!(si.normal.dot(sj.normal) > config.beta)) continue;
      const Vec3 mid = (si.center + sj.center) / 2.0;
      delta += 1.0;
      ++added;
      if (original.nearest(mid).distance <= 1e-9) continue;
      if (!grid.insert_if_new(mid)) continue;
      new_points.push_back(mid);
      parents.push_back(set.seeds[i]);
    }
  }

  PointCloud extra = select(cloud, parents);
  extra.positions = new_points;
  PointCloud base = cloud;
  base.normals.reset();
  extra.normals.reset();
  return concatenate(base, extra);
}

PreparedCloud prepare_cloud(const PointCloud& cloud, std::size_t k, const NormalOptions& normals,
                            bool classify) {
  if (cloud.empty()) throw InvalidArgument("splat generation: cloud is empty");
  PointIndex index = build_point_index(cloud);
  ScaleStats stats;
  stats.k = k;
  stats.r_bar = mean_knn_radius(cloud, index, k);
  PointCloud with_normals = estimate_normals(cloud, index, stats, normals);
  stats.e_bar = mean_plane_error(with_normals, index, k, stats.r_bar);
  if (classify) with_normals = classify_by_descriptors(with_normals, index, stats).cloud;
  return {std::move(with_normals), std::move(index), stats};
}

namespace {

using Timings = std::vector<std::pair<std::string, double>>;

template <typename Fn>
auto timed(Timings& timings, const char* stage, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  auto value = fn();
  timings.emplace_back(stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  return value;
}

GenConfig make_gen_config(const PipelineConfig& config, const ScaleStats& stats) {
  GenConfig gen;
  gen.variant = config.variant;
  gen.alpha = config.alpha;
  gen.beta = config.beta;
  gen.stats = stats;
  gen.overrides = config.overrides;
  return gen;
}

}  // namespace

ResampleResult resample_stage(const PointCloud& cloud, const PipelineConfig& config) {
  if (config.variant == Variant::AdaSemantic && !cloud.groups)
    throw ConfigError("the semantic variant needs per-point groups (apply a group mapping first)");
  const bool classify = config.variant == Variant::AdaDescr;
  ResampleResult result;

  PointCloud working = cloud;
  if (config.denoise) {
    working = timed(result.timings, "denoise", [&] {
      PreparedCloud raw = prepare_cloud(cloud, config.k, config.normals, false);
      return denoise(raw.cloud, raw.index, raw.stats);
    });
  }
  result.denoised_points = working.size();

  PreparedCloud prepared =
      timed(result.timings, "features", [&] { return prepare_cloud(working, config.k, config.normals, classify); });
  result.splats = timed(result.timings, "generate", [&] {
    return generate_splats(prepared.cloud, prepared.index, make_gen_config(config, prepared.stats));
  });
  result.stats = prepared.stats;

  if (config.resample) {
    if (result.splats.empty()) throw InvalidArgument("splat generation produced no splats to resample");
    result.cloud = timed(result.timings, "resample", [&] {
      const DensityStats density = compute_density(result.splats, prepared.stats);
      return resample_cloud(prepared.cloud, result.splats, density, make_gen_config(config, prepared.stats),
                            config.max_resample_per_splat);
    });
    result.added_points = result.cloud.size() - prepared.cloud.size();
  } else {
    result.cloud = std::move(prepared.cloud);
  }
  return result;
}

PipelineResult run_adaptive_pipeline(const PointCloud& cloud, const PipelineConfig& config) {
  ResampleResult first = resample_stage(cloud, config);
  PipelineResult result;
  result.timings = std::move(first.timings);
  result.denoised_points = first.denoised_points;
  result.resampled_points = first.added_points;

  if (config.resample) {
    // Groups carried by the augmented cloud are kept; only normals and stats are re-estimated.
    PreparedCloud again = timed(result.timings, "features_resampled",
                                [&] { return prepare_cloud(first.cloud, config.k, config.normals, false); });
    result.initial_splats = std::move(first.splats);
    result.splats = timed(result.timings, "generate_resampled", [&] {
      return generate_splats(again.cloud, again.index, make_gen_config(config, again.stats));
    });
    result.final_stats = again.stats;
    result.cloud = std::move(again.cloud);
  } else {
    result.initial_splats = first.splats;
    result.splats = std::move(first.splats);
    result.final_stats = first.stats;
    result.cloud = std::move(first.cloud);
  }
  result.splats.metadata["denoise"] = config.denoise ? "on" : "off";
  result.splats.metadata["resample"] = config.resample ? "on" : "off";
  return result;
}

}  // namespace splatsim
