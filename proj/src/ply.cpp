#include "splatsim/ply.hpp"

#include "splatsim/common.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace splatsim::ply {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary PLY support assumes a little-endian host");

struct PropertyDecl {
  std::string name;
  std::string type;             // scalar type, or list item type
  std::string list_count_type;  // non-empty for list properties
};

struct ElementDecl {
  std::string name;
  std::size_t count = 0;
  std::vector<PropertyDecl> properties;
};

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
double load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return static_cast<double>(v);
}

double decode(const std::string& type, const char* p) {
  if (type == "char") return load_le<std::int8_t>(p);
  if (type == "uchar") return load_le<std::uint8_t>(p);
  if (type == "short") return load_le<std::int16_t>(p);
  if (type == "ushort") return load_le<std::uint16_t>(p);
  if (type == "int") return load_le<std::int32_t>(p);
  if (type == "uint") return load_le<std::uint32_t>(p);
  if (type == "float") return load_le<float>(p);
  return load_le<double>(p);
}

template <typename T>
void store_le(std::string& out, double value) {
  const T v = static_cast<T>(value);
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void encode(std::string& out, const std::string& type, double value) {
  if (type == "char") return store_le<std::int8_t>(out, value);
  if (type == "uchar") return store_le<std::uint8_t>(out, value);
  if (type == "short") return store_le<std::int16_t>(out, value);
  if (type == "ushort") return store_le<std::uint16_t>(out, value);
  if (type == "int") return store_le<std::int32_t>(out, value);
  if (type == "uint") return store_le<std::uint32_t>(out, value);
  if (type == "float") return store_le<float>(out, value);
  return store_le<double>(out, value);
}

bool is_integral(const std::string& type) { return type != "float" && type != "double"; }

std::string format_ascii(const std::string& type, double value) {
  if (is_integral(type)) return std::to_string(static_cast<long long>(value));
  char buf[64];
  // Round-trip precision for the stored type.
  const int digits = type == "float" ? 9 : 17;
  const int n = std::snprintf(buf, sizeof(buf), "%.*g", digits, value);
  return std::string(buf, static_cast<std::size_t>(n));
}

bool parse_number(std::string_view token, double& out) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

std::string canonical_type(std::string_view type) {
  if (type == "char" || type == "int8") return "char";
  if (type == "uchar" || type == "uint8") return "uchar";
  if (type == "short" || type == "int16") return "short";
  if (type == "ushort" || type == "uint16") return "ushort";
  if (type == "int" || type == "int32") return "int";
  if (type == "uint" || type == "uint32") return "uint";
  if (type == "float" || type == "float32") return "float";
  if (type == "double" || type == "float64") return "double";
  return {};
}

std::size_t type_size(std::string_view canonical) {
  if (canonical == "char" || canonical == "uchar") return 1;
  if (canonical == "short" || canonical == "ushort") return 2;
  if (canonical == "int" || canonical == "uint" || canonical == "float") return 4;
  return 8;
}

const Column* VertexTable::find(std::string_view name) const {
  for (const auto& c : columns)
    if (c.name == name) return &c;
  return nullptr;
}

VertexTable parse(const std::string& bytes) {
  std::size_t pos = 0;
  auto next_line = [&](std::size_t& line_start) -> std::string_view {
    line_start = pos;
    if (pos >= bytes.size()) throw ParseError("PLY header ended before end_header", pos);
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw ParseError("PLY header ended before end_header", bytes.size());
    std::string_view line(bytes.data() + pos, nl - pos);
    pos = nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
  };

  std::size_t line_start = 0;
  if (next_line(line_start) != "ply") throw ParseError("missing 'ply' magic", 0);

  VertexTable table;
  std::vector<ElementDecl> elements;
  bool have_format = false;
  for (;;) {
    const std::string_view line = next_line(line_start);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "comment" || tok[0] == "obj_info") {
      const std::size_t skip = line.find(tok[0]) + tok[0].size();
      std::string_view rest = line.substr(skip);
      if (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
      if (tok[0] == "comment") table.comments.emplace_back(rest);
      continue;
    }
    if (tok[0] == "format") {
      if (tok.size() != 3 || tok[2] != "1.0") throw ParseError("malformed format line", line_start);
      if (tok[1] == "ascii") {
        table.encoding = Encoding::Ascii;
      } else if (tok[1] == "binary_little_endian") {
        table.encoding = Encoding::BinaryLittleEndian;
      } else {
        throw ParseError("unsupported PLY encoding '" + std::string(tok[1]) + "'", line_start);
      }
      have_format = true;
      continue;
    }
    if (tok[0] == "element") {
      std::size_t count = 0;
      if (tok.size() != 3) throw ParseError("malformed element line", line_start);
      auto [ptr, ec] = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), count);
      if (ec != std::errc() || ptr != tok[2].data() + tok[2].size())
        throw ParseError("malformed element count", line_start);
      elements.push_back({std::string(tok[1]), count, {}});
      continue;
    }
    if (tok[0] == "property") {
      if (elements.empty()) throw ParseError("property before any element", line_start);
      PropertyDecl prop;
      if (tok.size() == 5 && tok[1] == "list") {
        prop.list_count_type = canonical_type(tok[2]);
        prop.type = canonical_type(tok[3]);
        prop.name = tok[4];
        if (prop.list_count_type.empty() || prop.type.empty())
          throw ParseError("unknown list property type", line_start);
      } else if (tok.size() == 3) {
        prop.type = canonical_type(tok[1]);
        prop.name = tok[2];
        if (prop.type.empty())
          throw ParseError("unknown property type '" + std::string(tok[1]) + "'", line_start);
      } else {
        throw ParseError("malformed property line", line_start);
      }
      elements.back().properties.push_back(std::move(prop));
      continue;
    }
    throw ParseError("unexpected header keyword '" + std::string(tok[0]) + "'", line_start);
  }
  if (!have_format) throw ParseError("missing format line", pos);

  const ElementDecl* vertex = nullptr;
  for (const auto& e : elements) {
    if (e.name == "vertex") vertex = &e;
  }
  if (vertex) {
    for (const auto& p : vertex->properties) {
      if (!p.list_count_type.empty())
        throw ParseError("list property '" + p.name + "' on vertex element is unsupported", 0);
      table.columns.push_back({p.name, p.type, {}});
      table.columns.back().values.resize(vertex->count);
    }
    table.count = vertex->count;
  }

  if (table.encoding == Encoding::BinaryLittleEndian) {
    for (const auto& e : elements) {
      const bool is_vertex = &e == vertex;
      for (std::size_t row = 0; row < e.count; ++row) {
        for (std::size_t c = 0; c < e.properties.size(); ++c) {
          const auto& p = e.properties[c];
          if (!p.list_count_type.empty()) {
            const std::size_t cs = type_size(p.list_count_type);
            if (pos + cs > bytes.size()) throw ParseError("truncated binary payload", pos);
            const auto n = static_cast<std::size_t>(decode(p.list_count_type, bytes.data() + pos));
            if (pos + cs + n * type_size(p.type) > bytes.size())
              throw ParseError("truncated binary payload", pos);
            pos += cs + n * type_size(p.type);
            continue;
          }
          const std::size_t sz = type_size(p.type);
          if (pos + sz > bytes.size()) throw ParseError("truncated binary payload", pos);
          if (is_vertex) table.columns[c].values[row] = decode(p.type, bytes.data() + pos);
          pos += sz;
        }
      }
    }
  } else {
    for (const auto& e : elements) {
      const bool is_vertex = &e == vertex;
      for (std::size_t row = 0; row < e.count; ++row) {
        if (pos >= bytes.size()) throw ParseError("truncated ascii payload", bytes.size());
        std::size_t nl = bytes.find('\n', pos);
        if (nl == std::string::npos) nl = bytes.size();
        const std::size_t start = pos;
        const auto tok = split_ws(std::string_view(bytes.data() + pos, nl - pos));
        pos = nl + 1;
        if (tok.empty()) {
          --row;
          continue;
        }
        std::size_t t = 0;
        for (std::size_t c = 0; c < e.properties.size(); ++c) {
          const auto& p = e.properties[c];
          double v = 0;
          if (t >= tok.size() || !parse_number(tok[t], v))
            throw ParseError("malformed ascii value in element '" + e.name + "'", start);
          ++t;
          if (!p.list_count_type.empty()) {
            t += static_cast<std::size_t>(v);
            if (t > tok.size()) throw ParseError("truncated ascii list", start);
            continue;
          }
          if (is_vertex) table.columns[c].values[row] = v;
        }
      }
    }
  }
  return table;
}

VertexTable read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(bytes);
}

std::string serialize(const VertexTable& table) {
  std::ostringstream header;
  header << "ply\n";
  header << (table.encoding == Encoding::Ascii ? "format ascii 1.0\n"
                                               : "format binary_little_endian 1.0\n");
  for (const auto& c : table.comments) header << "comment " << c << '\n';
  header << "element vertex " << table.count << '\n';
  for (const auto& c : table.columns) header << "property " << c.type << ' ' << c.name << '\n';
  header << "end_header\n";

  std::string out = header.str();
  if (table.encoding == Encoding::BinaryLittleEndian) {
    std::size_t row_size = 0;
    for (const auto& c : table.columns) row_size += type_size(c.type);
    out.reserve(out.size() + row_size * table.count);
    for (std::size_t r = 0; r < table.count; ++r)
      for (const auto& c : table.columns) encode(out, c.type, c.values[r]);
  } else {
    for (std::size_t r = 0; r < table.count; ++r) {
      for (std::size_t i = 0; i < table.columns.size(); ++i) {
        if (i) out.push_back(' ');
        out += format_ascii(table.columns[i].type, table.columns[i].values[r]);
      }
      out.push_back('\n');
    }
  }
  return out;
}

void write(const std::filesystem::path& path, const VertexTable& table) {
  for (const auto& c : table.columns) {
    if (c.values.size() != table.count)
      throw StructuralError("PLY column '" + c.name + "' length does not match vertex count");
  }
  const std::string bytes = serialize(table);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace splatsim::ply
