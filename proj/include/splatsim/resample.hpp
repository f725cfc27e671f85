#pragma once

#include "splatsim/splatgen.hpp"

#include <chrono>
#include <string>
#include <utility>

namespace splatsim {

// Per-point outlier marks: for each point with a normal, neighbors whose
// unsigned plane distance exceeds mean + 3 sigma of its neighborhood are
// marked. Neighborhoods with sigma at round-off level are skipped.
std::vector<std::uint8_t> outlier_marks(const PointCloud& cloud, const PointIndex& index,
                                        const ScaleStats& stats);

// Removes every marked point in one pass. Requires normals.
PointCloud denoise(const PointCloud& cloud, const PointIndex& index, const ScaleStats& stats);

struct DensityStats {
  std::vector<std::size_t> counts;     // other eligible splat centers within R-bar
  std::vector<std::uint8_t> eligible;  // non-NonSurface splats
  double mean = 0;                     // over eligible splats
};

DensityStats compute_density(const SplatSet& set, const ScaleStats& stats);

inline constexpr std::size_t kMaxResamplePerSplat = 8;

// Adds midpoints between sparse splats and compatible far neighbors. Original
// points come first and are unchanged; normals are dropped since the augmented
// cloud must be re-estimated.
PointCloud resample_cloud(const PointCloud& cloud, const SplatSet& set, const DensityStats& density,
                          const GenConfig& config, std::size_t max_per_splat = kMaxResamplePerSplat);

struct PipelineConfig {
  Variant variant = Variant::AdaDescr;
  double alpha = 0.2;
  double beta = 0.6;
  std::size_t k = kDefaultK;
  bool denoise = true;
  bool resample = true;
  std::size_t max_resample_per_splat = kMaxResamplePerSplat;
  NormalOptions normals;
  std::map<SurfaceGroup, GroupParams> overrides;
};

struct PreparedCloud {
  PointCloud cloud;  // with normals (and descriptor groups for AdaDescr)
  PointIndex index;
  ScaleStats stats;
};

// Index, R-bar, normals, E-bar; plus descriptor classification when asked.
PreparedCloud prepare_cloud(const PointCloud& cloud, std::size_t k, const NormalOptions& normals,
                            bool classify);

struct PipelineResult {
  SplatSet splats;          // final splat set
  PointCloud cloud;         // the cloud the final set was generated from
  SplatSet initial_splats;  // first generation, before resampling
  std::size_t denoised_points = 0;
  std::size_t resampled_points = 0;
  ScaleStats final_stats;
  std::vector<std::pair<std::string, double>> timings;  // stage, seconds
};

struct ResampleResult {
  PointCloud cloud;  // augmented cloud without normals; the prepared cloud when resampling is off
  SplatSet splats;   // the generation the midpoints were placed from
  ScaleStats stats;
  std::size_t denoised_points = 0;
  std::size_t added_points = 0;
  std::vector<std::pair<std::string, double>> timings;
};

// denoise -> normals/stats -> (classify) -> generate -> density -> midpoints.
ResampleResult resample_stage(const PointCloud& cloud, const PipelineConfig& config);

// resample_stage, then normals/stats on the augmented cloud -> generate.
// One resampling round.
PipelineResult run_adaptive_pipeline(const PointCloud& cloud, const PipelineConfig& config);

}  // namespace splatsim
