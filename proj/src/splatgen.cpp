#include "splatsim/splatgen.hpp"

#include <cmath>
#include <sstream>

namespace splatsim {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Basic: return "basic";
    case Variant::AdaSemantic: return "semantic";
    case Variant::AdaDescr: return "descr";
  }
  return "unknown";
}

std::optional<Variant> parse_variant(std::string_view text) {
  if (text == "basic") return Variant::Basic;
  if (text == "semantic" || text == "adasemantic") return Variant::AdaSemantic;
  if (text == "descr" || text == "adadescr") return Variant::AdaDescr;
  return std::nullopt;
}

GroupParams group_params(SurfaceGroup group, Variant variant) {
  constexpr GroupParams kUnit{1, 1, 1};
  constexpr GroupParams kLinear{0.33, 0.33, 0.33};
  constexpr GroupParams kNonSurface{0.25, 0.25, 0.25};
  switch (variant) {
    case Variant::Basic:
      return kUnit;
    case Variant::AdaSemantic:
      switch (group) {
        case SurfaceGroup::Ground: return {3, 3, 3};
        case SurfaceGroup::Surface: return kUnit;
        case SurfaceGroup::Linear: return kLinear;
        case SurfaceGroup::NonSurface: return kNonSurface;
        case SurfaceGroup::GroundSurface: break;
      }
      break;
    case Variant::AdaDescr:
      switch (group) {
        case SurfaceGroup::GroundSurface: return {2, 2, 2};
        case SurfaceGroup::Linear: return kLinear;
        case SurfaceGroup::NonSurface: return kNonSurface;
        default: break;
      }
      break;
  }
  throw ConfigError("group '" + std::string(to_string(group)) + "' is not defined for variant '" +
                    std::string(to_string(variant)) + "'");
}

GroupParams GenConfig::params_for(SurfaceGroup group) const {
  if (auto it = overrides.find(group); it != overrides.end()) return it->second;
  return group_params(group, variant);
}

std::size_t GenConfig::k_for(SurfaceGroup group) const {
  const long k = std::lround(params_for(group).k_scale * static_cast<double>(stats.k));
  return static_cast<std::size_t>(std::max(1L, k));
}

void GenConfig::validate() const {
  if (!(alpha >= 0 && alpha <= 1)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(beta >= -1 && beta <= 1)) throw ConfigError("beta must lie in [-1, 1]");
  if (stats.k == 0) throw ConfigError("K must be positive");
  if (!(stats.r_bar > 0)) throw ConfigError("R-bar must be positive");
  if (!(stats.e_bar >= 0)) throw ConfigError("E-bar must be non-negative");
  for (const auto& [g, p] : overrides) {
    if (!(p.k_scale > 0 && p.r_scale > 0 && p.e_scale > 0))
      throw ConfigError("group parameters must be positive");
  }
}

namespace {

SurfaceGroup seed_group(const PointCloud& cloud, std::size_t i, Variant variant) {
  if (variant == Variant::Basic) return cloud.groups ? (*cloud.groups)[i] : SurfaceGroup::Surface;
  if (!cloud.groups) throw ConfigError("adaptive splatting requires per-point groups");
  return (*cloud.groups)[i];
}

// Same class for the semantic variant (falls back to group without labels),
// same group for the descriptor variant.
bool same_class(const PointCloud& cloud, std::size_t a, std::size_t b, Variant variant) {
  if (variant == Variant::AdaSemantic && cloud.labels) return (*cloud.labels)[a] == (*cloud.labels)[b];
  return (*cloud.groups)[a] == (*cloud.groups)[b];
}

}  // namespace

std::optional<GrownSplat> grow_splat(std::size_t seed, const PointCloud& cloud, const PointIndex& index,
                                     const GenConfig& config) {
  if (!cloud.has_normal(seed)) throw InvalidArgument("seed point has no oriented normal");
  const SurfaceGroup group = seed_group(cloud, seed, config.variant);
  const GroupParams params = config.params_for(group);
  const std::size_t k = config.k_for(group);
  const double radius_limit = params.r_scale * config.stats.r_bar;
  const double error_bound = params.e_scale * config.stats.e_bar;

  const Vec3& p = cloud.positions[seed];
  const Vec3& n = (*cloud.normals)[seed];

  GrownSplat grown;
  double offset_sum = 0;
  for (const Neighbor& nb : restricted_neighborhood(index, seed, k, radius_limit)) {
    const std::size_t j = nb.index;
    const double eps = n.dot(cloud.positions[j] - p);
    if (std::abs(eps) > error_bound) break;
    if (config.variant != Variant::Basic && !same_class(cloud, seed, j, config.variant)) break;
    if (!cloud.has_normal(j) || !(n.dot((*cloud.normals)[j]) > config.beta)) break;
    grown.included.push_back(j);
    offset_sum += eps;
  }
  if (grown.included.empty()) return std::nullopt;

  // The seed contributes a zero offset to the mean.
  grown.mean_offset = offset_sum / static_cast<double>(grown.included.size() + 1);
  const Vec3 center = p + grown.mean_offset * n;
  const Vec3 to_last = cloud.positions[grown.included.back()] - center;
  const double radius = (to_last - n.dot(to_last) * n).norm();
  if (!(radius > 0)) return std::nullopt;

  grown.splat.center = center;
  grown.splat.normal = n;
  grown.splat.radius = radius;
  grown.splat.group = group;
  if (cloud.labels) grown.splat.label = (*cloud.labels)[seed];

  grown.consumed.push_back(seed);
  const double discard = config.alpha * radius;
  for (std::size_t j : grown.included) {
    if ((cloud.positions[j] - center).norm() <= discard) grown.consumed.push_back(j);
  }
  return grown;
}

SplatSet generate_splats(const PointCloud& cloud, const PointIndex& index, const GenConfig& config) {
  config.validate();
  if (!cloud.normals) throw InvalidArgument("splat generation requires estimated normals");
  bool any_normal = false;
  for (std::size_t i = 0; i < cloud.size() && !any_normal; ++i) any_normal = cloud.has_normal(i);
  if (!any_normal) throw InvalidArgument("no point has an oriented normal");
  if (config.variant != Variant::Basic && !cloud.groups)
    throw ConfigError("adaptive splatting requires per-point groups");

  SplatSet set;
  std::vector<std::uint8_t> consumed(cloud.size(), 0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (consumed[i] || !cloud.has_normal(i)) continue;
    consumed[i] = 1;
    auto grown = grow_splat(i, cloud, index, config);
    if (!grown) continue;
    for (std::size_t j : grown->consumed) consumed[j] = 1;
    set.splats.push_back(grown->splat);
    set.seeds.push_back(i);
  }

  auto fmt = [](double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
  };
  set.metadata["variant"] = std::string(to_string(config.variant));
  set.metadata["alpha"] = fmt(config.alpha);
  set.metadata["beta"] = fmt(config.beta);
  set.metadata["k"] = std::to_string(config.stats.k);
  set.metadata["r_bar"] = fmt(config.stats.r_bar);
  set.metadata["e_bar"] = fmt(config.stats.e_bar);
  set.metadata["r_bar_definition"] = "mean_distance_to_kth_neighbor";
  set.metadata["e_bar_definition"] = "pooled_pairs_mean";
  set.metadata["input_points"] = std::to_string(cloud.size());
  return set;
}

}  // namespace splatsim
