#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "cir/mesh.hpp"

namespace cir {

struct ParamOptions {
  int max_iters = 10000;
  /// Stop once the relative energy decrease of a sweep falls below this.
  double tol = 1e-7;
  /// Relaxation factor in (0, 1] for each vertex update.
  double step = 1.0;
  /// Rounds of region growth allowed when repairing flipped faces.
  int repair_rounds = 12;
  /// Take cotangent weights from the intrinsic Delaunay triangulation of the
  /// surface, where they are never negative, instead of clamping the mesh's own.
  bool intrinsic_delaunay = true;
};

/// Unit-sphere image of a genus-0 mesh (same indexing and connectivity).
struct SphericalMap {
  Vertices positions;
  int iterations_used = 0;
  double final_energy = 0.0;
  /// Energy after initialization followed by one entry per accepted sweep.
  std::vector<double> energy_history;
};

/// Per-face and per-vertex log ratio of normalized spherical to input area.
struct AreaDistortionMap {
  Eigen::VectorXd epsilon_vertex;
  Eigen::VectorXd epsilon_face;
};

/// Maps a closed genus-0 mesh onto the unit sphere.
///
/// Vertices start at their directions from the surface centroid. Each sweep
/// moves every vertex (in index order) to the normalized cotangent-weighted
/// mean of its neighbors, which never raises the string energy, then applies a
/// Möbius normalization that keeps the area-weighted centroid of the image at
/// the origin. Sweeps that would raise the energy or leave flipped faces are
/// rejected and end the iteration. Flipped faces are repaired by uniform
/// relaxation over a growing neighborhood.
///
/// Throws Error(NonManifold), Error(NotGenusZero) or Error(NoBijectiveMap).
SphericalMap parameterize(const TriMesh& mesh, const ParamOptions& options = {});

AreaDistortionMap area_distortion(const TriMesh& mesh, const SphericalMap& map);

/// Symmetric edge weights 0.5 * (max(cot a, 0) + max(cot b, 0)), aligned with `topo.edges`.
Eigen::VectorXd cotangent_weights(const TriMesh& mesh, const MeshTopology& topo);

/// Weighted vertex pairs of a Laplacian; pairs need not be mesh edges.
struct WeightedEdges {
  std::vector<std::array<int, 2>> pairs;
  Eigen::VectorXd weights;
};

/// Cotangent weights of the intrinsic Delaunay triangulation reached by edge
/// flips from the mesh. Pairs are sorted; the weights are all >= 0 up to round-off.
WeightedEdges intrinsic_delaunay_weights(const TriMesh& mesh);

/// Sum over pairs of w_ij * |p_i - p_j|^2.
double harmonic_energy(const Vertices& positions, const WeightedEdges& edges);

/// Sum over edges of w_ij * |p_i - p_j|^2.
double harmonic_energy(const Vertices& positions, const MeshTopology& topo, const Eigen::VectorXd& weights);

/// Faces whose spherical image has det(p0, p1, p2) <= 0.
int count_flipped_faces(const Vertices& positions, const Faces& faces);

/// Area-weighted centroid of the flat triangles spanned by `positions`.
Eigen::Vector3d surface_centroid(const Vertices& positions, const Faces& faces);

/// Möbius normalization of points on the unit sphere so the area-weighted
/// centroid has norm <= `tolerance`. Returns the final centroid norm.
double mobius_center(Vertices& positions, const Faces& faces, double tolerance = 1e-6, int max_steps = 200);

/// One "iteration energy" line per recorded energy.
void write_energy_log(const SphericalMap& map, const std::filesystem::path& path);

}  // namespace cir
