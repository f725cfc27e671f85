#include "splatsim/cloud.hpp"

#include "splatsim/ply.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

namespace splatsim {

namespace {

template <typename T>
void check_length(const std::optional<std::vector<T>>& attr, std::size_t n, const char* name) {
  if (attr && attr->size() != n)
    throw StructuralError(std::string("attribute '") + name + "' has " +
                          std::to_string(attr->size()) + " entries for " + std::to_string(n) +
                          " points");
}

template <typename T>
std::optional<std::vector<T>> pick(const std::optional<std::vector<T>>& attr,
                                   std::span<const std::size_t> indices) {
  if (!attr) return std::nullopt;
  std::vector<T> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back((*attr)[i]);
  return out;
}

template <typename T>
std::optional<std::vector<T>> join(const std::optional<std::vector<T>>& a,
                                   const std::optional<std::vector<T>>& b) {
  if (!a || !b) return std::nullopt;
  std::vector<T> out = *a;
  out.insert(out.end(), b->begin(), b->end());
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

const ply::Column* find_any(const ply::VertexTable& t, std::initializer_list<std::string_view> names) {
  for (auto n : names)
    if (const auto* c = t.find(n)) return c;
  return nullptr;
}

constexpr std::string_view kSplatMagic = "splatsim_splats version ";

}  // namespace

void PointCloud::validate() const {
  const std::size_t n = positions.size();
  check_length(normals, n, "normals");
  check_length(labels, n, "labels");
  check_length(groups, n, "groups");
  check_length(sensor_positions, n, "sensor_positions");
  check_length(frame_ids, n, "frame_ids");
  for (const auto& e : extras) {
    if (e.values.size() != n)
      throw StructuralError("extra property '" + e.name + "' length mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!positions[i].allFinite())
      throw StructuralError("position " + std::to_string(i) + " is not finite");
  }
  if (normals) {
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3& nrm = (*normals)[i];
      if (nrm.isZero(0.0)) continue;
      if (std::abs(nrm.norm() - 1.0) > 1e-6)
        throw StructuralError("normal " + std::to_string(i) + " is not unit length");
    }
  }
}

PointCloud select(const PointCloud& cloud, std::span<const std::size_t> indices) {
  PointCloud out;
  out.positions.reserve(indices.size());
  for (auto i : indices) out.positions.push_back(cloud.positions[i]);
  out.normals = pick(cloud.normals, indices);
  out.labels = pick(cloud.labels, indices);
  out.groups = pick(cloud.groups, indices);
  out.sensor_positions = pick(cloud.sensor_positions, indices);
  out.frame_ids = pick(cloud.frame_ids, indices);
  for (const auto& e : cloud.extras) {
    ExtraProperty p{e.name, e.type, {}};
    p.values.reserve(indices.size());
    for (auto i : indices) p.values.push_back(e.values[i]);
    out.extras.push_back(std::move(p));
  }
  return out;
}

PointCloud concatenate(const PointCloud& a, const PointCloud& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  PointCloud out;
  out.positions = a.positions;
  out.positions.insert(out.positions.end(), b.positions.begin(), b.positions.end());
  out.normals = join(a.normals, b.normals);
  out.labels = join(a.labels, b.labels);
  out.groups = join(a.groups, b.groups);
  out.sensor_positions = join(a.sensor_positions, b.sensor_positions);
  out.frame_ids = join(a.frame_ids, b.frame_ids);
  for (const auto& ea : a.extras) {
    for (const auto& eb : b.extras) {
      if (ea.name != eb.name) continue;
      ExtraProperty p = ea;
      p.values.insert(p.values.end(), eb.values.begin(), eb.values.end());
      out.extras.push_back(std::move(p));
    }
  }
  return out;
}

bool SplatSet::has_dynamic() const {
  return std::any_of(splats.begin(), splats.end(), [](const Splat& s) { return s.frame_id.has_value(); });
}

GroupMapping GroupMapping::parse(std::string_view text) {
  GroupMapping mapping;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string id_text, group_text, flag;
    if (!(fields >> id_text)) continue;
    if (!(fields >> group_text))
      throw ConfigError("mapping line " + std::to_string(line_no) + ": missing group");
    ClassId id = 0;
    auto [ptr, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
    if (ec != std::errc() || ptr != id_text.data() + id_text.size())
      throw ConfigError("mapping line " + std::to_string(line_no) + ": bad class id '" + id_text + "'");
    const auto group = parse_surface_group(group_text);
    if (!group)
      throw ConfigError("mapping line " + std::to_string(line_no) + ": unknown group '" + group_text + "'");
    if (fields >> flag) {
      if (flag != "dynamic")
        throw ConfigError("mapping line " + std::to_string(line_no) + ": unknown flag '" + flag + "'");
      mapping.dynamic_classes.insert(id);
    }
    if (mapping.groups.count(id))
      throw ConfigError("mapping line " + std::to_string(line_no) + ": class " + id_text + " mapped twice");
    mapping.groups[id] = *group;
  }
  return mapping;
}

GroupMapping GroupMapping::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

SemanticPartition map_semantic_groups(const PointCloud& cloud, const GroupMapping& mapping) {
  if (!cloud.labels) throw ConfigError("semantic grouping requires per-point labels");
  std::set<ClassId> unmapped;
  for (ClassId c : *cloud.labels)
    if (!mapping.groups.count(c)) unmapped.insert(c);
  if (!unmapped.empty()) {
    std::string list;
    for (ClassId c : unmapped) list += (list.empty() ? "" : ",") + std::to_string(c);
    throw ConfigError("unmapped class ids: [" + list + "]");
  }

  PointCloud grouped = cloud;
  grouped.groups = std::vector<SurfaceGroup>(cloud.size());
  std::vector<std::size_t> static_idx;
  std::map<FrameId, std::vector<std::size_t>> dynamic_idx;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const ClassId c = (*cloud.labels)[i];
    (*grouped.groups)[i] = mapping.groups.at(c);
    if (mapping.dynamic_classes.count(c)) {
      const FrameId f = cloud.frame_ids ? (*cloud.frame_ids)[i] : 0;
      dynamic_idx[f].push_back(i);
    } else {
      static_idx.push_back(i);
    }
  }

  SemanticPartition out;
  out.static_cloud = select(grouped, static_idx);
  for (const auto& [frame, idx] : dynamic_idx) out.dynamic_frames[frame] = select(grouped, idx);
  return out;
}

CloudFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".bin") return CloudFormat::KittiBin;
  if (ext == ".ply") return CloudFormat::Ply;
  throw InvalidArgument("cannot infer cloud format from '" + path.string() + "'");
}

namespace {

PointCloud load_kitti(const std::filesystem::path& path,
                      const std::optional<std::filesystem::path>& labels_path) {
  const std::string bytes = read_file(path);
  constexpr std::size_t kRecord = 4 * sizeof(float);
  if (bytes.size() % kRecord != 0)
    throw ParseError("truncated KITTI record in '" + path.string() + "'",
                     bytes.size() - bytes.size() % kRecord);
  const std::size_t n = bytes.size() / kRecord;
  PointCloud cloud;
  cloud.positions.resize(n);
  ExtraProperty intensity{"intensity", "float", std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    float rec[4];
    std::memcpy(rec, bytes.data() + i * kRecord, kRecord);
    cloud.positions[i] = Vec3(rec[0], rec[1], rec[2]);
    intensity.values[i] = rec[3];
  }
  cloud.extras.push_back(std::move(intensity));

  if (labels_path) {
    const std::string lbytes = read_file(*labels_path);
    if (lbytes.size() % sizeof(std::uint32_t) != 0)
      throw ParseError("truncated label record in '" + labels_path->string() + "'",
                       lbytes.size() - lbytes.size() % sizeof(std::uint32_t));
    const std::size_t m = lbytes.size() / sizeof(std::uint32_t);
    if (m != n)
      throw StructuralError("label file has " + std::to_string(m) + " entries for " +
                            std::to_string(n) + " points");
    std::vector<ClassId> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t raw;
      std::memcpy(&raw, lbytes.data() + i * sizeof(raw), sizeof(raw));
      labels[i] = raw & 0xFFFFu;
    }
    cloud.labels = std::move(labels);
  }
  cloud.validate();
  return cloud;
}

PointCloud load_ply_cloud(const std::filesystem::path& path) {
  const ply::VertexTable table = ply::read(path);
  const auto* x = table.find("x");
  const auto* y = table.find("y");
  const auto* z = table.find("z");
  if (!x || !y || !z) throw StructuralError("PLY '" + path.string() + "' lacks x/y/z properties");
  const std::size_t n = table.count;

  std::set<const ply::Column*> used{x, y, z};
  PointCloud cloud;
  cloud.positions.resize(n);
  for (std::size_t i = 0; i < n; ++i) cloud.positions[i] = Vec3(x->values[i], y->values[i], z->values[i]);

  const auto* nx = find_any(table, {"nx", "normal_x"});
  const auto* ny = find_any(table, {"ny", "normal_y"});
  const auto* nz = find_any(table, {"nz", "normal_z"});
  if (nx && ny && nz) {
    used.insert({nx, ny, nz});
    std::vector<Vec3> normals(n);
    for (std::size_t i = 0; i < n; ++i) {
      Vec3 v(nx->values[i], ny->values[i], nz->values[i]);
      const double len = v.norm();
      // Zero stays the "no normal" flag; coarsely quantized unit vectors are renormalized.
      normals[i] = len > 0 && std::abs(len - 1.0) > 1e-6 ? Vec3(v / len) : v;
      if (len > 0 && std::abs(len - 1.0) > 1e-3)
        throw StructuralError("normal " + std::to_string(i) + " in '" + path.string() + "' is not unit");
    }
    cloud.normals = std::move(normals);
  }

  if (const auto* l = find_any(table, {"label", "semantic", "class", "scalar_label"})) {
    used.insert(l);
    std::vector<ClassId> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (l->values[i] < 0) throw StructuralError("negative class id at vertex " + std::to_string(i));
      labels[i] = static_cast<ClassId>(l->values[i]);
    }
    cloud.labels = std::move(labels);
  }

  if (const auto* g = table.find("group")) {
    used.insert(g);
    std::vector<SurfaceGroup> groups(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = g->values[i];
      if (v < 0 || !is_valid_group_code(static_cast<std::uint32_t>(v)))
        throw StructuralError("invalid group code at vertex " + std::to_string(i));
      groups[i] = static_cast<SurfaceGroup>(static_cast<std::uint8_t>(v));
    }
    cloud.groups = std::move(groups);
  }

  const auto* sx = table.find("sensor_x");
  const auto* sy = table.find("sensor_y");
  const auto* sz = table.find("sensor_z");
  if (sx && sy && sz) {
    used.insert({sx, sy, sz});
    std::vector<Vec3> sensors(n);
    for (std::size_t i = 0; i < n; ++i) sensors[i] = Vec3(sx->values[i], sy->values[i], sz->values[i]);
    cloud.sensor_positions = std::move(sensors);
  }

  if (const auto* f = table.find("frame_id")) {
    used.insert(f);
    std::vector<FrameId> frames(n);
    for (std::size_t i = 0; i < n; ++i) frames[i] = static_cast<FrameId>(f->values[i]);
    cloud.frame_ids = std::move(frames);
  }

  for (const auto& c : table.columns) {
    if (used.count(&c)) continue;
    cloud.extras.push_back({c.name, c.type, c.values});
  }
  cloud.validate();
  return cloud;
}

}  // namespace

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format,
                      const std::optional<std::filesystem::path>& labels_path) {
  if (format == CloudFormat::KittiBin) return load_kitti(path, labels_path);
  if (labels_path) throw InvalidArgument("a separate label file is only supported for KITTI input");
  return load_ply_cloud(path);
}

PointCloud load_cloud(const std::filesystem::path& path) {
  return load_cloud(path, format_from_path(path));
}

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path, PlyEncoding encoding) {
  cloud.validate();
  const std::size_t n = cloud.size();
  ply::VertexTable t;
  t.encoding = encoding == PlyEncoding::Ascii ? ply::Encoding::Ascii : ply::Encoding::BinaryLittleEndian;
  t.count = n;
  auto add = [&](std::string name, std::string type) -> std::vector<double>& {
    t.columns.push_back({std::move(name), std::move(type), std::vector<double>(n)});
    return t.columns.back().values;
  };
  for (int axis = 0; axis < 3; ++axis) {
    auto& col = add(std::string(1, "xyz"[axis]), "double");
    for (std::size_t i = 0; i < n; ++i) col[i] = cloud.positions[i][axis];
  }
  if (cloud.normals) {
    for (int axis = 0; axis < 3; ++axis) {
      auto& col = add(std::string("n") + "xyz"[axis], "double");
      for (std::size_t i = 0; i < n; ++i) col[i] = (*cloud.normals)[i][axis];
    }
  }
  if (cloud.labels) {
    auto& col = add("label", "uint");
    for (std::size_t i = 0; i < n; ++i) col[i] = (*cloud.labels)[i];
  }
  if (cloud.groups) {
    auto& col = add("group", "uchar");
    for (std::size_t i = 0; i < n; ++i) col[i] = static_cast<double>((*cloud.groups)[i]);
  }
  if (cloud.sensor_positions) {
    for (int axis = 0; axis < 3; ++axis) {
      auto& col = add(std::string("sensor_") + "xyz"[axis], "double");
      for (std::size_t i = 0; i < n; ++i) col[i] = (*cloud.sensor_positions)[i][axis];
    }
  }
  if (cloud.frame_ids) {
    auto& col = add("frame_id", "uint");
    for (std::size_t i = 0; i < n; ++i) col[i] = (*cloud.frame_ids)[i];
  }
  for (const auto& e : cloud.extras) {
    const std::string type = ply::canonical_type(e.type);
    if (type.empty()) {
      std::cerr << "warning: dropping property '" << e.name << "' with unsupported type '" << e.type
                << "'\n";
      continue;
    }
    t.columns.push_back({e.name, type, e.values});
  }
  ply::write(path, t);
}

void save_splats(const SplatSet& set, const std::filesystem::path& path) {
  const std::size_t n = set.size();
  ply::VertexTable t;
  t.count = n;
  t.comments.push_back(std::string(kSplatMagic) + std::to_string(kSplatFileVersion));
  for (const auto& [key, value] : set.metadata) t.comments.push_back("meta " + key + "=" + value);

  auto add = [&](std::string name, std::string type) -> std::vector<double>& {
    t.columns.push_back({std::move(name), std::move(type), std::vector<double>(n)});
    return t.columns.back().values;
  };
  const char* names[7] = {"x", "y", "z", "nx", "ny", "nz", "radius"};
  for (int c = 0; c < 7; ++c) {
    auto& col = add(names[c], "double");
    for (std::size_t i = 0; i < n; ++i) {
      const Splat& s = set.splats[i];
      col[i] = c < 3 ? s.center[c] : c < 6 ? s.normal[c - 3] : s.radius;
    }
  }
  auto& group = add("group", "uchar");
  for (std::size_t i = 0; i < n; ++i) group[i] = static_cast<double>(set.splats[i].group);

  const bool any_label = std::any_of(set.splats.begin(), set.splats.end(),
                                     [](const Splat& s) { return s.label.has_value(); });
  if (any_label) {
    auto& col = add("label", "int");
    for (std::size_t i = 0; i < n; ++i) col[i] = set.splats[i].label ? double(*set.splats[i].label) : -1.0;
  }
  if (set.has_dynamic()) {
    auto& col = add("frame_id", "int");
    for (std::size_t i = 0; i < n; ++i)
      col[i] = set.splats[i].frame_id ? double(*set.splats[i].frame_id) : -1.0;
  }
  ply::write(path, t);
}

SplatSet load_splats(const std::filesystem::path& path) {
  const ply::VertexTable t = ply::read(path);
  SplatSet set;
  for (const auto& c : t.comments) {
    if (c.rfind(kSplatMagic, 0) == 0) {
      const std::string version = c.substr(kSplatMagic.size());
      if (version != std::to_string(kSplatFileVersion))
        throw FormatError("splat file version " + version + " is not supported (expected " +
                          std::to_string(kSplatFileVersion) + ")");
    } else if (c.rfind("meta ", 0) == 0) {
      const std::string kv = c.substr(5);
      const auto eq = kv.find('=');
      if (eq != std::string::npos) set.metadata[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
  }

  const char* required[7] = {"x", "y", "z", "nx", "ny", "nz", "radius"};
  const ply::Column* cols[7];
  for (int c = 0; c < 7; ++c) {
    cols[c] = t.find(required[c]);
    if (!cols[c]) throw FormatError(std::string("splat file lacks property '") + required[c] + "'");
  }
  const auto* group = t.find("group");
  const auto* label = t.find("label");
  const auto* frame = t.find("frame_id");

  set.splats.resize(t.count);
  for (std::size_t i = 0; i < t.count; ++i) {
    Splat& s = set.splats[i];
    s.center = Vec3(cols[0]->values[i], cols[1]->values[i], cols[2]->values[i]);
    s.normal = Vec3(cols[3]->values[i], cols[4]->values[i], cols[5]->values[i]);
    s.radius = cols[6]->values[i];
    if (!(s.radius > 0) || !std::isfinite(s.radius))
      throw FormatError("splat record " + std::to_string(i) + " has non-positive radius");
    if (!s.center.allFinite() || std::abs(s.normal.norm() - 1.0) > 1e-9)
      throw FormatError("splat record " + std::to_string(i) + " has an invalid center or normal");
    if (group) {
      const double g = group->values[i];
      if (g < 0 || !is_valid_group_code(static_cast<std::uint32_t>(g)))
        throw FormatError("splat record " + std::to_string(i) + " has an invalid group");
      s.group = static_cast<SurfaceGroup>(static_cast<std::uint8_t>(g));
    }
    if (label && label->values[i] >= 0) s.label = static_cast<ClassId>(label->values[i]);
    if (frame && frame->values[i] >= 0) s.frame_id = static_cast<FrameId>(frame->values[i]);
  }
  return set;
}

}  // namespace splatsim
