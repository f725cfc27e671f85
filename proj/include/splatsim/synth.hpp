#pragma once

#include "splatsim/cloud.hpp"

#include <cstdint>

// Built-in synthetic scenes. Every point carries a label, a sensor position
// and frame 0. Class ids: 1 ground, 2 second surface / pole.
namespace splatsim::synth {

inline constexpr ClassId kGroundClass = 1;
inline constexpr ClassId kFeatureClass = 2;

struct PlaneOptions {
  std::size_t count = 100000;
  double extent = 40.0;  // side of the square patch centered at the origin
  double noise_sigma = 0.0;
  Vec3 sensor = Vec3(0, 0, 10);
  std::uint64_t seed = 1;
};
// z = 0 plane with Gaussian z-noise, uniform random xy.
PointCloud plane(const PlaneOptions& options);

struct DihedralOptions {
  std::size_t count_per_face = 20000;
  double extent = 6.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 2;
};
// Floor z = 0 (x >= 0, class 1) meeting a wall x = 0 (z >= 0, class 2) at 90 degrees.
PointCloud dihedral(const DihedralOptions& options);

struct PoleOptions {
  std::size_t ground_count = 40000;
  double ground_extent = 12.0;
  std::size_t pole_count = 3000;
  double pole_radius = 0.03;
  double pole_height = 3.0;
  Vec3 pole_base = Vec3(2.0, 0.0, 0.0);
  double noise_sigma = 0.003;
  std::uint64_t seed = 3;
};
// Ground plane (class 1) plus a thin vertical cylinder (class 2).
PointCloud pole(const PoleOptions& options);

struct ScanlineOptions {
  std::size_t lines = 60;
  double line_spacing = 0.25;    // across-track gap between sweep lines
  double point_spacing = 0.02;   // along-track spacing
  double length = 8.0;
  double line_jitter = 0.03;     // per-line offset noise, keeps lines unevenly spaced
  double spacing_growth = 1.0;   // line gap multiplier per line, density falling off with range
  double noise_sigma = 0.002;
  double spike_fraction = 0.0;   // share of points displaced off the surface
  double spike_offset = 0.1;     // displacement of a spike along +-z, meters
  std::uint64_t seed = 4;
};
// Anisotropic sweep lines over a ground plane, as a mobile scanner produces.
PointCloud scanlines(const ScanlineOptions& options);

// Group mapping matching a scene: ground -> Ground, class 2 -> Linear for the
// pole scene and Surface otherwise.
GroupMapping mapping_for(std::string_view scene);

}  // namespace splatsim::synth
