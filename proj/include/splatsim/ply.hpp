#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

// Minimal PLY reader/writer for vertex-only tables of scalar properties.
// Non-vertex elements are skipped on read (list properties included);
// a list property on the vertex element is rejected.
namespace splatsim::ply {

enum class Encoding { Ascii, BinaryLittleEndian };

struct Column {
  std::string name;
  std::string type;  // canonical PLY type: char uchar short ushort int uint float double
  std::vector<double> values;
};

struct VertexTable {
  Encoding encoding = Encoding::BinaryLittleEndian;
  std::vector<std::string> comments;
  std::size_t count = 0;
  std::vector<Column> columns;

  const Column* find(std::string_view name) const;
};

VertexTable read(const std::filesystem::path& path);
VertexTable parse(const std::string& bytes);

void write(const std::filesystem::path& path, const VertexTable& table);
std::string serialize(const VertexTable& table);

// Returns the canonical spelling ("float32" -> "float") or an empty string.
std::string canonical_type(std::string_view type);
std::size_t type_size(std::string_view canonical);

}  // namespace splatsim::ply
