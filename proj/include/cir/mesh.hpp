#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cir {

using Vertices = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Indexed triangle surface. Faces are counter-clockwise seen from outside.
/// Channels are per-vertex attributes ("epsilon", "class", ...).
struct TriMesh {
  Vertices vertices;
  Faces faces;
  std::map<std::string, Eigen::VectorXd> channels;

  int vertex_count() const { return static_cast<int>(vertices.rows()); }
  int face_count() const { return static_cast<int>(faces.rows()); }

  Eigen::Vector3d vertex(int v) const { return vertices.row(v).transpose(); }
};

/// Edge/adjacency structure derived from a mesh's faces.
struct MeshTopology {
  /// Undirected edges (a < b), sorted lexicographically.
  Eigen::Matrix<int, Eigen::Dynamic, 2, Eigen::RowMajor> edges;
  /// For each edge, the incident faces (-1 where absent).
  Eigen::Matrix<int, Eigen::Dynamic, 2, Eigen::RowMajor> edge_faces;
  /// Sorted one-ring vertex neighbors per vertex.
  std::vector<std::vector<int>> neighbors;
  /// Faces incident to each vertex, ascending.
  std::vector<std::vector<int>> vertex_faces;
  bool closed = true;

  int edge_count() const { return static_cast<int>(edges.rows()); }
};

/// Throws Error(InvalidMesh) unless indices are in range, no face repeats an
/// index, edges are shared by at most two faces, orientation is consistent and
/// channel lengths match. With `require_closed`, boundary edges are rejected too.
void validate_mesh(const TriMesh& mesh, bool require_closed = false);

MeshTopology build_topology(const TriMesh& mesh);

struct MeshStats {
  int vertices = 0;
  int edges = 0;
  int faces = 0;
  int euler = 0;
  int genus = 0;
  double surface_area = 0.0;
  double volume = 0.0;
};

/// Throws Error(OpenSurface) for meshes with boundary edges.
MeshStats mesh_stats(const TriMesh& mesh);

Eigen::VectorXd face_areas(const Vertices& vertices, const Faces& faces);
double surface_area(const TriMesh& mesh);
/// Signed volume sum of det(v0, v1, v2) / 6; positive for outward orientation.
double signed_volume(const TriMesh& mesh);
/// Per-vertex sum of incident face areas.
Eigen::VectorXd one_ring_areas(const TriMesh& mesh, const MeshTopology& topo);
/// Area-weighted unit vertex normals.
Vertices vertex_normals(const TriMesh& mesh, const MeshTopology& topo);

/// Submesh of the edge-connected face component with the most faces
/// (ties: component containing the lowest face index). Channels are carried over.
TriMesh largest_component(const TriMesh& mesh);

/// Taubin lambda/mu smoothing; off by default in the pipeline.
TriMesh taubin_smooth(const TriMesh& mesh, int iterations, double lambda = 0.5, double mu = -0.53);

TriMesh read_obj(const std::filesystem::path& path);
void write_obj(const TriMesh& mesh, const std::filesystem::path& path);

/// Vertex colors for the "class" channel: base white, spiculation red, lobulation blue.
std::array<std::uint8_t, 3> class_color(int vertex_class);

/// ASCII PLY with every channel as a per-vertex property ("class" as uchar,
/// others as float) and red/green/blue derived from "class" when present.
void write_ply(const TriMesh& mesh, const std::filesystem::path& path,
               const std::vector<std::string>& comments = {});
TriMesh read_ply(const std::filesystem::path& path);

}  // namespace cir
