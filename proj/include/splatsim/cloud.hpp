#pragma once

#include "splatsim/common.hpp"

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace splatsim {

// A PLY property that is not one of the known attributes, kept for round-trips.
struct ExtraProperty {
  std::string name;
  std::string type;
  std::vector<double> values;
};

// Point cloud with optional per-point attributes. Optional attribute vectors,
// when present, have one entry per position. A zero normal marks a point whose
// neighborhood was too degenerate to estimate one.
struct PointCloud {
  std::vector<Vec3> positions;
  std::optional<std::vector<Vec3>> normals;
  std::optional<std::vector<ClassId>> labels;
  std::optional<std::vector<SurfaceGroup>> groups;
  std::optional<std::vector<Vec3>> sensor_positions;
  std::optional<std::vector<FrameId>> frame_ids;
  std::vector<ExtraProperty> extras;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  bool has_normal(std::size_t i) const {
    return normals && !(*normals)[i].isZero(0.0);
  }

  // Throws StructuralError on attribute length mismatch, non-finite positions,
  // or normals that are neither unit (1e-6) nor the zero flag.
  void validate() const;
};

// Copies the listed points with every attribute.
PointCloud select(const PointCloud& cloud, std::span<const std::size_t> indices);
// Concatenates b after a. Attributes present in only one input are dropped.
PointCloud concatenate(const PointCloud& a, const PointCloud& b);

// Oriented disk surface primitive.
struct Splat {
  Vec3 center = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double radius = 0;
  SurfaceGroup group = SurfaceGroup::Surface;
  std::optional<ClassId> label;
  std::optional<FrameId> frame_id;
};

struct SplatSet {
  std::vector<Splat> splats;
  // Index of the seed point for each splat, when generated in-process.
  std::vector<std::size_t> seeds;
  std::map<std::string, std::string> metadata;

  std::size_t size() const { return splats.size(); }
  bool empty() const { return splats.empty(); }
  bool has_dynamic() const;
};

// class id -> surface group, plus the classes treated as moving objects.
struct GroupMapping {
  std::map<ClassId, SurfaceGroup> groups;
  std::set<ClassId> dynamic_classes;

  // One `class_id group [dynamic]` per line; '#' starts a comment.
  static GroupMapping parse(std::string_view text);
  static GroupMapping load(const std::filesystem::path& path);
};

struct SemanticPartition {
  PointCloud static_cloud;
  std::map<FrameId, PointCloud> dynamic_frames;
};

SemanticPartition map_semantic_groups(const PointCloud& cloud, const GroupMapping& mapping);

enum class CloudFormat { Ply, KittiBin };

CloudFormat format_from_path(const std::filesystem::path& path);

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format,
                      const std::optional<std::filesystem::path>& labels_path = std::nullopt);
PointCloud load_cloud(const std::filesystem::path& path);

enum class PlyEncoding { Ascii, Binary };

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                PlyEncoding encoding = PlyEncoding::Binary);

inline constexpr int kSplatFileVersion = 1;

void save_splats(const SplatSet& set, const std::filesystem::path& path);
SplatSet load_splats(const std::filesystem::path& path);

}  // namespace splatsim
