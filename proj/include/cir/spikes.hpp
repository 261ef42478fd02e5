#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "cir/mesh.hpp"
#include "cir/spherical.hpp"
#include "cir/volume.hpp"

namespace cir {

enum class SpikeClass { Unclassified, Spiculation, Lobulation, Other };

std::string_view to_string(SpikeClass c);

/// Per-vertex classes in annotations; "other" spikes count as base.
namespace vertex_class {
inline constexpr int kBase = 0;
inline constexpr int kSpiculation = 1;
inline constexpr int kLobulation = 2;
}  // namespace vertex_class

struct SpikeOptions {
  /// Vertices with epsilon <= noise_floor are spike tissue.
  double noise_floor = -0.02;
  int min_vertices = 8;
  /// Spikes sharper than this apex angle are spiculations.
  double theta_spic_deg = 65.0;
  double min_height_mm = 1.0;
};

/// Connected surface protrusion of negative area distortion.
struct Spike {
  std::vector<int> vertex_ids;  // ascending
  int apex_id = -1;
  double height_mm = 0.0;
  double base_radius_mm = 0.0;
  double apex_angle_deg = 0.0;
  double mean_epsilon = 0.0;
  SpikeClass cls = SpikeClass::Unclassified;
};

struct AnnotationSummary {
  int n_spiculations = 0;
  int n_lobulations = 0;
  double spiculation_area_fraction = 0.0;
  double lobulation_area_fraction = 0.0;
  double base_area_fraction = 1.0;
  double min_epsilon = 0.0;
  /// Empty when there is no spiculation.
  std::optional<double> mean_apex_angle_spiculation_deg;
};

struct NoduleAnnotation {
  Eigen::VectorXi vertex_class;
  std::vector<Spike> spikes;
  AnnotationSummary summary;
};

/// Maximal connected components of {v : epsilon_v <= noise_floor}, seeded from
/// the lowest vertex id, with geometry filled in. Components smaller than
/// `min_vertices` come back as Other. Sorted by apex epsilon ascending.
std::vector<Spike> detect_spikes(const TriMesh& mesh, const AreaDistortionMap& adm, const SpikeOptions& options = {});

/// Geometry of a vertex set: apex, base-plane height, base radius, apex angle, mean epsilon.
Spike measure_spike(const TriMesh& mesh, const MeshTopology& topo, const Eigen::VectorXd& epsilon,
                    std::vector<int> vertex_ids);

/// Sharp (apex angle below the threshold) spikes are spiculations, the rest lobulations;
/// small or low spikes are Other. An apex angle equal to the threshold is a lobulation.
SpikeClass classify_spike(const Spike& spike, const SpikeOptions& options = {});

NoduleAnnotation annotate(const TriMesh& mesh, const AreaDistortionMap& adm, const SpikeOptions& options = {});

/// Label volume on `grid`'s geometry: voxels inside the mesh get base (1);
/// voxels within half a voxel diagonal of the surface take the class of the
/// nearest vertex (spiculation 2, lobulation 3, base 1; ties prefer
/// spiculation, then lobulation). Near-surface voxels outside the mesh are
/// only labeled when that class is a spike class.
///
/// Throws Error(GridTooCoarse) when the mesh spans fewer than 3 voxels on an axis.
MaskVolume voxelize_annotation(const NoduleAnnotation& annotation, const TriMesh& mesh, const MaskVolume& grid);

/// Inside/outside of voxel centers by +x parity ray casting.
std::vector<char> inside_mask(const TriMesh& mesh, const MaskVolume& grid);

}  // namespace cir
