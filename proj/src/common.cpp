#include "splatsim/common.hpp"

#include <algorithm>
#include <cctype>

namespace splatsim {

std::string_view to_string(SurfaceGroup group) {
  switch (group) {
    case SurfaceGroup::Ground: return "ground";
    case SurfaceGroup::Surface: return "surface";
    case SurfaceGroup::Linear: return "linear";
    case SurfaceGroup::NonSurface: return "nonsurface";
    case SurfaceGroup::GroundSurface: return "groundsurface";
  }
  return "unknown";
}

std::optional<SurfaceGroup> parse_surface_group(std::string_view text) {
  std::string key;
  for (char c : text) {
    if (c == '-' || c == '_') continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (key == "ground") return SurfaceGroup::Ground;
  if (key == "surface") return SurfaceGroup::Surface;
  if (key == "linear") return SurfaceGroup::Linear;
  if (key == "nonsurface") return SurfaceGroup::NonSurface;
  if (key == "groundsurface") return SurfaceGroup::GroundSurface;
  return std::nullopt;
}

bool is_valid_group_code(std::uint32_t code) { return code <= 4; }

ParseError::ParseError(const std::string& what, std::uint64_t byte_offset)
    : Error(what + " (at byte offset " + std::to_string(byte_offset) + ")"),
      offset_(byte_offset) {}

}  // namespace splatsim
