#include "cir/mesh.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <unordered_map>

#include "cir/error.hpp"

namespace cir {

namespace {

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

void validate_mesh(const TriMesh& mesh, bool require_closed) {
  const int nv = mesh.vertex_count();
  for (int f = 0; f < mesh.face_count(); ++f) {
    for (int c = 0; c < 3; ++c) {
      const int v = mesh.faces(f, c);
      if (v < 0 || v >= nv) throw Error(ErrorCode::InvalidMesh, "face index out of range");
    }
    if (mesh.faces(f, 0) == mesh.faces(f, 1) || mesh.faces(f, 1) == mesh.faces(f, 2) ||
        mesh.faces(f, 0) == mesh.faces(f, 2)) {
      throw Error(ErrorCode::InvalidMesh, "face " + std::to_string(f) + " repeats a vertex");
    }
  }
  if (!mesh.vertices.allFinite()) throw Error(ErrorCode::InvalidMesh, "non-finite vertex position");
  for (const auto& [name, values] : mesh.channels) {
    if (values.size() != nv) throw Error(ErrorCode::InvalidMesh, "channel '" + name + "' has wrong length");
  }

  // Directed half-edges must be unique (consistent orientation, <= 2 faces per edge).
  std::unordered_map<std::uint64_t, int> directed;
  directed.reserve(static_cast<std::size_t>(mesh.face_count()) * 3);
  for (int f = 0; f < mesh.face_count(); ++f) {
    for (int c = 0; c < 3; ++c) {
      const int a = mesh.faces(f, c);
      const int b = mesh.faces(f, (c + 1) % 3);
      const auto key = (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
      if (!directed.emplace(key, f).second) {
        throw Error(ErrorCode::InvalidMesh, "edge (" + std::to_string(a) + "," + std::to_string(b) +
                                                ") is non-manifold or inconsistently oriented");
      }
    }
  }
  if (require_closed) {
    for (const auto& [key, f] : directed) {
      const auto a = static_cast<std::uint32_t>(key >> 32);
      const auto b = static_cast<std::uint32_t>(key & 0xffffffffu);
      const auto twin = (static_cast<std::uint64_t>(b) << 32) | a;
      if (!directed.count(twin)) throw Error(ErrorCode::InvalidMesh, "mesh has a boundary edge");
    }
  }
}

MeshTopology build_topology(const TriMesh& mesh) {
  MeshTopology topo;
  const int nv = mesh.vertex_count();
  const int nf = mesh.face_count();

  struct HalfEdge {
    std::uint64_t key;
    int face;
  };
  std::vector<HalfEdge> half;
  half.reserve(static_cast<std::size_t>(nf) * 3);
  for (int f = 0; f < nf; ++f) {
    for (int c = 0; c < 3; ++c) half.push_back({edge_key(mesh.faces(f, c), mesh.faces(f, (c + 1) % 3)), f});
  }
  std::sort(half.begin(), half.end(), [](const HalfEdge& x, const HalfEdge& y) {
    return x.key != y.key ? x.key < y.key : x.face < y.face;
  });

  std::vector<std::array<int, 4>> rows;
  for (std::size_t i = 0; i < half.size();) {
    std::size_t j = i;
    while (j < half.size() && half[j].key == half[i].key) ++j;
    const auto a = static_cast<int>(half[i].key >> 32);
    const auto b = static_cast<int>(half[i].key & 0xffffffffu);
    const int f0 = half[i].face;
    const int f1 = j - i > 1 ? half[i + 1].face : -1;
    if (j - i != 2) topo.closed = false;
    rows.push_back({a, b, f0, f1});
    i = j;
  }
  topo.edges.resize(static_cast<Eigen::Index>(rows.size()), 2);
  topo.edge_faces.resize(static_cast<Eigen::Index>(rows.size()), 2);
  topo.neighbors.assign(nv, {});
  for (std::size_t e = 0; e < rows.size(); ++e) {
    topo.edges.row(e) << rows[e][0], rows[e][1];
    topo.edge_faces.row(e) << rows[e][2], rows[e][3];
    topo.neighbors[rows[e][0]].push_back(rows[e][1]);
    topo.neighbors[rows[e][1]].push_back(rows[e][0]);
  }
  for (auto& n : topo.neighbors) std::sort(n.begin(), n.end());
  topo.vertex_faces.assign(nv, {});
  for (int f = 0; f < nf; ++f) {
    for (int c = 0; c < 3; ++c) topo.vertex_faces[mesh.faces(f, c)].push_back(f);
  }
  if (nf == 0) topo.closed = false;
  return topo;
}

Eigen::VectorXd face_areas(const Vertices& vertices, const Faces& faces) {
  Eigen::VectorXd areas(faces.rows());
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    const Eigen::Vector3d a = vertices.row(faces(f, 0));
    const Eigen::Vector3d b = vertices.row(faces(f, 1));
    const Eigen::Vector3d c = vertices.row(faces(f, 2));
    areas[f] = 0.5 * (b - a).cross(c - a).norm();
  }
  return areas;
}

double surface_area(const TriMesh& mesh) { return face_areas(mesh.vertices, mesh.faces).sum(); }

double signed_volume(const TriMesh& mesh) {
  double vol = 0.0;
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Eigen::Vector3d a = mesh.vertices.row(mesh.faces(f, 0));
    const Eigen::Vector3d b = mesh.vertices.row(mesh.faces(f, 1));
    const Eigen::Vector3d c = mesh.vertices.row(mesh.faces(f, 2));
    vol += a.dot(b.cross(c));
  }
  return vol / 6.0;
}

MeshStats mesh_stats(const TriMesh& mesh) {
  const auto topo = build_topology(mesh);
  if (!topo.closed) throw Error(ErrorCode::OpenSurface, "mesh has boundary edges");
  MeshStats s;
  s.vertices = mesh.vertex_count();
  s.edges = topo.edge_count();
  s.faces = mesh.face_count();
  s.euler = s.vertices - s.edges + s.faces;
  s.genus = (2 - s.euler) / 2;
  s.surface_area = surface_area(mesh);
  s.volume = std::abs(signed_volume(mesh));
  return s;
}

Eigen::VectorXd one_ring_areas(const TriMesh& mesh, const MeshTopology& topo) {
  const Eigen::VectorXd fa = face_areas(mesh.vertices, mesh.faces);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh.vertex_count());
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    for (int f : topo.vertex_faces[v]) out[v] += fa[f];
  }
  return out;
}

Vertices vertex_normals(const TriMesh& mesh, const MeshTopology& topo) {
  Vertices face_n(mesh.face_count(), 3);
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Eigen::Vector3d a = mesh.vertices.row(mesh.faces(f, 0));
    const Eigen::Vector3d b = mesh.vertices.row(mesh.faces(f, 1));
    const Eigen::Vector3d c = mesh.vertices.row(mesh.faces(f, 2));
    face_n.row(f) = (b - a).cross(c - a).transpose();
  }
  Vertices out = Vertices::Zero(mesh.vertex_count(), 3);
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    Eigen::Vector3d n = Eigen::Vector3d::Zero();
    for (int f : topo.vertex_faces[v]) n += face_n.row(f).transpose();
    const double len = n.norm();
    if (len > 0.0) out.row(v) = (n / len).transpose();
  }
  return out;
}

TriMesh largest_component(const TriMesh& mesh) {
  const int nf = mesh.face_count();
  if (nf == 0) return mesh;
  const auto topo = build_topology(mesh);

  // Union-find over faces joined by shared edges.
  std::vector<int> parent(nf);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (int e = 0; e < topo.edge_count(); ++e) {
    const int f0 = topo.edge_faces(e, 0);
    const int f1 = topo.edge_faces(e, 1);
    if (f0 >= 0 && f1 >= 0) {
      const int r0 = find(f0);
      const int r1 = find(f1);
      if (r0 != r1) parent[std::max(r0, r1)] = std::min(r0, r1);
    }
  }
  std::vector<int> size(nf, 0);
  for (int f = 0; f < nf; ++f) ++size[find(f)];
  int best = 0;
  for (int r = 0; r < nf; ++r) {
    if (size[r] > size[best]) best = r;
  }

  std::vector<int> remap(mesh.vertex_count(), -1);
  std::vector<int> kept_vertices;
  std::vector<int> kept_faces;
  for (int f = 0; f < nf; ++f) {
    if (find(f) != best) continue;
    kept_faces.push_back(f);
    for (int c = 0; c < 3; ++c) {
      const int v = mesh.faces(f, c);
      if (remap[v] < 0) {
        remap[v] = static_cast<int>(kept_vertices.size());
        kept_vertices.push_back(v);
      }
    }
  }

  TriMesh out;
  out.vertices.resize(static_cast<Eigen::Index>(kept_vertices.size()), 3);
  for (std::size_t i = 0; i < kept_vertices.size(); ++i) out.vertices.row(i) = mesh.vertices.row(kept_vertices[i]);
  out.faces.resize(static_cast<Eigen::Index>(kept_faces.size()), 3);
  for (std::size_t i = 0; i < kept_faces.size(); ++i) {
    for (int c = 0; c < 3; ++c) out.faces(i, c) = remap[mesh.faces(kept_faces[i], c)];
  }
  for (const auto& [name, values] : mesh.channels) {
    Eigen::VectorXd ch(static_cast<Eigen::Index>(kept_vertices.size()));
    for (std::size_t i = 0; i < kept_vertices.size(); ++i) ch[i] = values[kept_vertices[i]];
    out.channels.emplace(name, std::move(ch));
  }
  return out;
}

TriMesh taubin_smooth(const TriMesh& mesh, int iterations, double lambda, double mu) {
  TriMesh out = mesh;
  const auto topo = build_topology(mesh);
  Vertices delta(mesh.vertex_count(), 3);
  auto step = [&](double factor) {
    for (int v = 0; v < out.vertex_count(); ++v) {
      const auto& nb = topo.neighbors[v];
      if (nb.empty()) {
        delta.row(v).setZero();
        continue;
      }
      Eigen::RowVector3d mean = Eigen::RowVector3d::Zero();
      for (int u : nb) mean += out.vertices.row(u);
      mean /= static_cast<double>(nb.size());
      delta.row(v) = mean - out.vertices.row(v);
    }
    out.vertices += factor * delta;
  };
  for (int it = 0; it < iterations; ++it) {
    step(lambda);
    step(mu);
  }
  return out;
}

}  // namespace cir
