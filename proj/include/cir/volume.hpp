#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cir {

/// Voxel class codes used in label volumes.
namespace label {
inline constexpr std::uint8_t kBackground = 0;
inline constexpr std::uint8_t kNoduleBase = 1;
inline constexpr std::uint8_t kSpiculation = 2;
inline constexpr std::uint8_t kLobulation = 3;
}  // namespace label

/// Labeled voxel grid with physical geometry. Labels are stored x-fastest;
/// `origin` is the physical position of the center of voxel (0,0,0).
struct MaskVolume {
  std::array<int, 3> dims{0, 0, 0};
  Eigen::Vector3d spacing = Eigen::Vector3d::Ones();
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> label_alphabet{0, 1, 2, 3};

  MaskVolume() = default;
  MaskVolume(std::array<int, 3> dims, Eigen::Vector3d spacing,
             Eigen::Vector3d origin = Eigen::Vector3d::Zero());

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) +
                                                static_cast<std::size_t>(dims[1]) * k);
  }
  bool contains(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
  }
  std::uint8_t at(int i, int j, int k) const { return labels[index(i, j, k)]; }
  std::uint8_t& at(int i, int j, int k) { return labels[index(i, j, k)]; }

  Eigen::Vector3d voxel_center(int i, int j, int k) const {
    return origin + spacing.cwiseProduct(Eigen::Vector3d(i, j, k));
  }

  std::size_t count_label(std::uint8_t value) const;
  std::size_t count_foreground() const;

  /// Throws Error(InvalidVolume) when any invariant is violated.
  void validate() const;
};

enum class NrrdEncoding { Raw, Gzip };

struct NrrdWriteOptions {
  NrrdEncoding encoding = NrrdEncoding::Raw;
  /// Extra "key:=value" lines written after the standard fields.
  std::map<std::string, std::string> key_values;
};

MaskVolume read_nrrd(const std::filesystem::path& path);

/// Key/value pairs ("key:=value") of an NRRD header, without reading the payload.
std::map<std::string, std::string> read_nrrd_key_values(const std::filesystem::path& path);

void write_nrrd(const MaskVolume& vol, const std::filesystem::path& path,
                const NrrdWriteOptions& options = {});

/// Nearest-neighbor resampling onto an isotropic grid covering the same
/// physical extent. `target` defaults to the finest input spacing.
MaskVolume resample_isotropic(const MaskVolume& vol, std::optional<double> target = std::nullopt);

}  // namespace cir
