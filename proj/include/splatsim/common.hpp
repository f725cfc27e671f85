#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace splatsim {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

using Vec3 = Vector3<double>;
using Mat3 = Matrix3<double>;

using ClassId = std::uint32_t;
using FrameId = std::uint32_t;

// Coarse surface category controlling splat growth parameters.
enum class SurfaceGroup : std::uint8_t {
  Ground = 0,
  Surface = 1,
  Linear = 2,
  NonSurface = 3,
  GroundSurface = 4,
};

std::string_view to_string(SurfaceGroup group);
// Accepts the canonical names plus common spellings ("non-surface", "non_surface").
std::optional<SurfaceGroup> parse_surface_group(std::string_view text);
bool is_valid_group_code(std::uint32_t code);

// Error hierarchy. Every stage failure is one of these.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual std::string_view kind() const noexcept { return "error"; }
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::uint64_t byte_offset);
  std::uint64_t byte_offset() const noexcept { return offset_; }
  std::string_view kind() const noexcept override { return "parse"; }

 private:
  std::uint64_t offset_;
};

class StructuralError : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "structural"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "config"; }
};

class FormatError : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "format"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "io"; }
};

class DegenerateError : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "degenerate"; }
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "argument"; }
};

}  // namespace splatsim
