#pragma once

#include "splatsim/cloud.hpp"
#include "splatsim/features.hpp"
#include "splatsim/point_index.hpp"

#include <map>
#include <optional>

namespace splatsim {

enum class Variant { Basic, AdaSemantic, AdaDescr };

std::string_view to_string(Variant v);
std::optional<Variant> parse_variant(std::string_view text);

// Multipliers applied to (K, R-bar, E-bar) for seeds of one group.
struct GroupParams {
  double k_scale = 1;
  double r_scale = 1;
  double e_scale = 1;
};

// Throws ConfigError when the group does not exist under the variant.
GroupParams group_params(SurfaceGroup group, Variant variant);

struct GenConfig {
  Variant variant = Variant::Basic;
  double alpha = 0.2;
  double beta = 0.6;
  ScaleStats stats;
  std::map<SurfaceGroup, GroupParams> overrides;

  GroupParams params_for(SurfaceGroup group) const;
  // Scaled neighborhood size, at least 1.
  std::size_t k_for(SurfaceGroup group) const;
  void validate() const;
};

struct GrownSplat {
  Splat splat;
  std::vector<std::size_t> included;  // neighbors accepted during growth, ascending distance
  std::vector<std::size_t> consumed;  // seed plus included points within alpha * radius of the center
  double mean_offset = 0;             // signed offset of the center along the normal
};

// Grows one splat from `seed`. Returns nothing when no neighbor passes the
// stopping checks (zero radius). Requires an oriented normal at the seed.
std::optional<GrownSplat> grow_splat(std::size_t seed, const PointCloud& cloud, const PointIndex& index,
                                     const GenConfig& config);

// Seeds in ascending point order, skipping points consumed by an earlier splat.
SplatSet generate_splats(const PointCloud& cloud, const PointIndex& index, const GenConfig& config);

}  // namespace splatsim
