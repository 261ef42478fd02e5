#include "cir/spherical.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "cir/error.hpp"

namespace cir {

namespace {

struct WeightedNeighbor {
  int vertex;
  double weight;
};

std::vector<std::vector<WeightedNeighbor>> weighted_adjacency(int vertex_count, const WeightedEdges& edges) {
  std::vector<std::vector<WeightedNeighbor>> adj(vertex_count);
  for (std::size_t e = 0; e < edges.pairs.size(); ++e) {
    const auto [a, b] = edges.pairs[e];
    adj[a].push_back({b, edges.weights[static_cast<Eigen::Index>(e)]});
    adj[b].push_back({a, edges.weights[static_cast<Eigen::Index>(e)]});
  }
  return adj;
}

WeightedEdges mesh_edge_weights(const MeshTopology& topo, const Eigen::VectorXd& weights) {
  WeightedEdges out;
  out.pairs.reserve(topo.edge_count());
  for (int e = 0; e < topo.edge_count(); ++e) out.pairs.push_back({topo.edges(e, 0), topo.edges(e, 1)});
  out.weights = weights;
  return out;
}

// Intrinsic triangulation over the mesh vertices: half-edges carry only
// connectivity and edge lengths, so flips never move a vertex.
class IntrinsicTriangulation {
 public:
  explicit IntrinsicTriangulation(const TriMesh& mesh) {
    const int nh = 3 * mesh.face_count();
    origin_.resize(nh);
    next_.resize(nh);
    twin_.assign(nh, -1);
    length_.resize(nh);
    degree_.assign(mesh.vertex_count(), 0);
    boundary_.assign(mesh.vertex_count(), 0);
    std::map<std::pair<int, int>, int> directed;
    for (int f = 0; f < mesh.face_count(); ++f) {
      for (int c = 0; c < 3; ++c) {
        const int h = 3 * f + c;
        const int a = mesh.faces(f, c);
        const int b = mesh.faces(f, (c + 1) % 3);
        origin_[h] = a;
        next_[h] = 3 * f + (c + 1) % 3;
        length_[h] = (mesh.vertex(a) - mesh.vertex(b)).norm();
        directed[{a, b}] = h;
        ++degree_[a];
      }
    }
    for (const auto& [ab, h] : directed) {
      const auto it = directed.find({ab.second, ab.first});
      if (it != directed.end()) {
        twin_[h] = it->second;
      } else {
        // Degree counts incident edges; the incoming boundary edge has no outgoing half.
        ++degree_[ab.second];
        boundary_[ab.first] = boundary_[ab.second] = 1;
      }
    }
  }

  int halfedge_count() const { return static_cast<int>(origin_.size()); }

  // Half the cotangent of the corner opposite `h` in its triangle.
  double half_cot(int h) const {
    const double e = length_[h];
    const double u = length_[next_[h]];
    const double v = length_[next_[next_[h]]];
    const double s = 0.5 * (e + u + v);
    const double area2 = s * (s - e) * (s - u) * (s - v);
    if (!(area2 > 0.0)) return 0.0;
    return (u * u + v * v - e * e) / (8.0 * std::sqrt(area2));
  }

  double weight(int h) const { return half_cot(h) + (twin_[h] >= 0 ? half_cot(twin_[h]) : 0.0); }

  // Flips edges with negative cotangent weight until none is left.
  void make_delaunay() {
    std::vector<int> stack;
    std::vector<char> queued(origin_.size(), 0);
    for (int h = 0; h < halfedge_count(); ++h) {
      if (h < twin_[h]) {  // boundary edges are never flipped
        stack.push_back(h);
        queued[h] = 1;
      }
    }
    const double tolerance = 1e-12;
    std::size_t budget = 64 * origin_.size() + 1024;
    while (!stack.empty() && budget-- > 0) {
      const int h = stack.back();
      stack.pop_back();
      queued[h] = 0;
      if (weight(h) >= -tolerance || !flip(h)) continue;
      for (int g : {next_[h], next_[next_[h]], next_[twin_[h]], next_[next_[twin_[h]]]}) {
        if (twin_[g] < 0) continue;
        const int key = std::min(g, twin_[g]);
        if (!queued[key]) {
          queued[key] = 1;
          stack.push_back(key);
        }
      }
    }
  }

  WeightedEdges weights() const {
    std::vector<std::pair<std::array<int, 2>, double>> items;
    for (int h = 0; h < halfedge_count(); ++h) {
      if (twin_[h] >= 0 && h > twin_[h]) continue;
      int a = origin_[h];
      int b = origin_[next_[h]];
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      items.push_back({{a, b}, std::max(0.0, weight(h))});
    }
    std::sort(items.begin(), items.end());
    WeightedEdges out;
    out.weights.resize(static_cast<Eigen::Index>(items.size()));
    for (std::size_t i = 0; i < items.size(); ++i) {
      out.pairs.push_back(items[i].first);
      out.weights[static_cast<Eigen::Index>(i)] = items[i].second;
    }
    return out;
  }

 private:
  // Replaces diagonal a-b of the quad (a, b, c) + (b, a, d) with c-d.
  bool flip(int h) {
    const int t = twin_[h];
    const int h1 = next_[h], h2 = next_[h1];
    const int t1 = next_[t], t2 = next_[t1];
    const int a = origin_[h], b = origin_[t];
    const int c = origin_[h2], d = origin_[t2];
    if (c == d || h1 == t || t1 == h) return false;
    // Interior vertices keep at least three edges, boundary vertices two.
    if (degree_[a] <= 3 - boundary_[a] || degree_[b] <= 3 - boundary_[b]) return false;

    // Unfold both triangles into the plane on either side of a-b.
    const double lab = length_[h];
    auto apex = [lab](double la, double lb, double side) {
      const double x = (la * la - lb * lb + lab * lab) / (2.0 * lab);
      const double y = std::sqrt(std::max(0.0, la * la - x * x));
      return Eigen::Vector2d(x, side * y);
    };
    const Eigen::Vector2d pc = apex(length_[h2], length_[h1], 1.0);
    const Eigen::Vector2d pd = apex(length_[t1], length_[t2], -1.0);
    const double lcd = (pc - pd).norm();
    if (!(lcd > 0.0)) return false;

    origin_[h] = c;
    origin_[t] = d;
    length_[h] = length_[t] = lcd;
    next_[h] = t2;
    next_[t2] = h1;
    next_[h1] = h;
    next_[t] = h2;
    next_[h2] = t1;
    next_[t1] = t;
    --degree_[a];
    --degree_[b];
    ++degree_[c];
    ++degree_[d];
    return true;
  }

  std::vector<int> origin_, next_, twin_;
  std::vector<double> length_;
  std::vector<int> degree_;
  std::vector<int> boundary_;
};

double cot_at(const Eigen::Vector3d& apex, const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const Eigen::Vector3d u = a - apex;
  const Eigen::Vector3d v = b - apex;
  const double cross = u.cross(v).norm();
  if (cross <= 0.0) return 0.0;
  return u.dot(v) / cross;
}

bool flipped(const Vertices& p, const Faces& faces, int f) {
  const Eigen::Vector3d a = p.row(faces(f, 0));
  const Eigen::Vector3d b = p.row(faces(f, 1));
  const Eigen::Vector3d c = p.row(faces(f, 2));
  return a.dot(b.cross(c)) <= 0.0;
}

// Gauss-Seidel uniform relaxation over a growing region around flipped faces.
bool repair_flips(Vertices& p, const TriMesh& mesh, const MeshTopology& topo, int rounds) {
  const int nv = mesh.vertex_count();
  std::vector<char> in_region(nv, 0);
  bool any = false;
  for (int f = 0; f < mesh.face_count(); ++f) {
    if (flipped(p, mesh.faces, f)) {
      any = true;
      for (int c = 0; c < 3; ++c) in_region[mesh.faces(f, c)] = 1;
    }
  }
  if (!any) return true;

  for (int round = 0; round < rounds; ++round) {
    std::vector<char> grown = in_region;
    for (int v = 0; v < nv; ++v) {
      if (!in_region[v]) continue;
      for (int u : topo.neighbors[v]) grown[u] = 1;
    }
    in_region = std::move(grown);

    for (int sweep = 0; sweep < 4000; ++sweep) {
      double moved = 0.0;
      for (int v = 0; v < nv; ++v) {
        if (!in_region[v] || topo.neighbors[v].empty()) continue;
        Eigen::RowVector3d s = Eigen::RowVector3d::Zero();
        for (int u : topo.neighbors[v]) s += p.row(u);
        const double len = s.norm();
        if (len <= 0.0) continue;
        const Eigen::RowVector3d q = s / len;
        moved = std::max(moved, (q - p.row(v)).squaredNorm());
        p.row(v) = q;
      }
      if (moved < 1e-24 || (sweep % 50 == 49 && count_flipped_faces(p, mesh.faces) == 0)) break;
    }
    if (count_flipped_faces(p, mesh.faces) == 0) return true;
  }
  return false;
}

void gauss_seidel_sweep(Vertices& p, const std::vector<std::vector<WeightedNeighbor>>& adj, double step) {
  for (std::size_t v = 0; v < adj.size(); ++v) {
    Eigen::RowVector3d s = Eigen::RowVector3d::Zero();
    for (const auto& n : adj[v]) s += n.weight * p.row(n.vertex);
    const double len = s.norm();
    if (len <= 0.0) continue;
    if (step >= 1.0) {
      p.row(v) = s / len;
    } else {
      const Eigen::RowVector3d q = (1.0 - step) * p.row(v) + step * (s / len);
      const double qn = q.norm();
      if (qn > 0.0) p.row(v) = q / qn;
    }
  }
}

void renormalize(Vertices& p) {
  for (Eigen::Index v = 0; v < p.rows(); ++v) p.row(v).normalize();
}

}  // namespace

Eigen::VectorXd cotangent_weights(const TriMesh& mesh, const MeshTopology& topo) {
  Eigen::VectorXd w(topo.edge_count());
  for (int e = 0; e < topo.edge_count(); ++e) {
    const int a = topo.edges(e, 0);
    const int b = topo.edges(e, 1);
    double sum = 0.0;
    for (int side = 0; side < 2; ++side) {
      const int f = topo.edge_faces(e, side);
      if (f < 0) continue;
      int opposite = -1;
      for (int c = 0; c < 3; ++c) {
        const int v = mesh.faces(f, c);
        if (v != a && v != b) opposite = v;
      }
      sum += std::max(0.0, cot_at(mesh.vertex(opposite), mesh.vertex(a), mesh.vertex(b)));
    }
    w[e] = 0.5 * sum;
  }
  return w;
}

WeightedEdges intrinsic_delaunay_weights(const TriMesh& mesh) {
  IntrinsicTriangulation tri(mesh);
  tri.make_delaunay();
  return tri.weights();
}

double harmonic_energy(const Vertices& positions, const WeightedEdges& edges) {
  double energy = 0.0;
  for (std::size_t e = 0; e < edges.pairs.size(); ++e) {
    energy += edges.weights[static_cast<Eigen::Index>(e)] *
              (positions.row(edges.pairs[e][0]) - positions.row(edges.pairs[e][1])).squaredNorm();
  }
  return energy;
}

double harmonic_energy(const Vertices& positions, const MeshTopology& topo, const Eigen::VectorXd& weights) {
  double energy = 0.0;
  for (int e = 0; e < topo.edge_count(); ++e) {
    energy += weights[e] * (positions.row(topo.edges(e, 0)) - positions.row(topo.edges(e, 1))).squaredNorm();
  }
  return energy;
}

int count_flipped_faces(const Vertices& positions, const Faces& faces) {
  int count = 0;
  for (Eigen::Index f = 0; f < faces.rows(); ++f) count += flipped(positions, faces, static_cast<int>(f));
  return count;
}

Eigen::Vector3d surface_centroid(const Vertices& positions, const Faces& faces) {
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  double total = 0.0;
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    const Eigen::Vector3d a = positions.row(faces(f, 0));
    const Eigen::Vector3d b = positions.row(faces(f, 1));
    const Eigen::Vector3d c = positions.row(faces(f, 2));
    const double area = 0.5 * (b - a).cross(c - a).norm();
    sum += area * (a + b + c) / 3.0;
    total += area;
  }
  return total > 0.0 ? Eigen::Vector3d(sum / total) : Eigen::Vector3d::Zero();
}

double mobius_center(Vertices& positions, const Faces& faces, double tolerance, int max_steps) {
  Eigen::Vector3d m = surface_centroid(positions, faces);
  for (int step = 0; step < max_steps && m.norm() > tolerance; ++step) {
    // x -> (1 - |c|^2)(x - c) / |x - c|^2 - c maps the sphere to itself and
    // pushes mass away from c; half the centroid is a stable step.
    const Eigen::RowVector3d c = 0.5 * m.transpose();
    const double scale = 1.0 - c.squaredNorm();
    for (Eigen::Index v = 0; v < positions.rows(); ++v) {
      const Eigen::RowVector3d d = positions.row(v) - c;
      positions.row(v) = scale * d / d.squaredNorm() - c;
      positions.row(v).normalize();
    }
    m = surface_centroid(positions, faces);
  }
  return m.norm();
}

SphericalMap parameterize(const TriMesh& mesh, const ParamOptions& options) {
  try {
    validate_mesh(mesh, /*require_closed=*/true);
  } catch (const Error& e) {
    throw Error(ErrorCode::NonManifold, e.what());
  }
  const auto topo = build_topology(mesh);
  if (!topo.closed) throw Error(ErrorCode::NonManifold, "mesh has boundary edges");
  const int euler = mesh.vertex_count() - topo.edge_count() + mesh.face_count();
  if (euler != 2) throw Error(ErrorCode::NotGenusZero, "Euler characteristic " + std::to_string(euler));
  if (!(options.step > 0.0 && options.step <= 1.0) || options.max_iters < 0 || !(options.tol >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "invalid parameterization options");
  }

  const WeightedEdges edges = options.intrinsic_delaunay ? intrinsic_delaunay_weights(mesh)
                                                        : mesh_edge_weights(topo, cotangent_weights(mesh, topo));
  const auto adj = weighted_adjacency(mesh.vertex_count(), edges);

  SphericalMap result;
  Vertices& p = result.positions;
  const Eigen::Vector3d center = surface_centroid(mesh.vertices, mesh.faces);
  p = mesh.vertices.rowwise() - center.transpose();
  const Vertices normals = vertex_normals(mesh, topo);
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    if (p.row(v).norm() <= 1e-12 * (1.0 + center.norm())) p.row(v) = normals.row(v);
  }
  renormalize(p);

  if (!repair_flips(p, mesh, topo, options.repair_rounds)) {
    throw Error(ErrorCode::NoBijectiveMap, "could not remove flipped faces of the initial map");
  }
  mobius_center(p, mesh.faces);
  if (count_flipped_faces(p, mesh.faces) != 0 && !repair_flips(p, mesh, topo, options.repair_rounds)) {
    throw Error(ErrorCode::NoBijectiveMap, "flipped faces after centering");
  }

  double energy = harmonic_energy(p, edges);
  result.energy_history.push_back(energy);

  // A sweep that flips a face or raises the energy is retried with half the
  // step; the step grows back after successes.
  constexpr int kMaxHalvings = 12;
  Vertices candidate;
  double step = options.step;
  int halvings = 0;
  for (int it = 0; it < options.max_iters;) {
    candidate = p;
    gauss_seidel_sweep(candidate, adj, step);
    mobius_center(candidate, mesh.faces);
    const double next = harmonic_energy(candidate, edges);
    if (count_flipped_faces(candidate, mesh.faces) != 0 || !(next <= energy)) {
      if (++halvings > kMaxHalvings) break;
      step *= 0.5;
      continue;
    }
    if (halvings > 0) --halvings;
    step = std::min(options.step, 2.0 * step);
    ++it;
    p.swap(candidate);
    const double decrease = energy > 0.0 ? (energy - next) / energy : 0.0;
    energy = next;
    result.energy_history.push_back(energy);
    ++result.iterations_used;
    if (decrease < options.tol) break;
  }

  result.final_energy = energy;
  return result;
}

AreaDistortionMap area_distortion(const TriMesh& mesh, const SphericalMap& map) {
  if (map.positions.rows() != mesh.vertex_count()) {
    throw Error(ErrorCode::ConnectivityMismatch, "spherical map and mesh have different vertex counts");
  }
  auto normalized = [](Eigen::VectorXd a) {
    const double floor = 1e-12 * a.mean();
    a = a.cwiseMax(floor);
    return Eigen::VectorXd(a / a.sum());
  };
  const Eigen::VectorXd in = normalized(face_areas(mesh.vertices, mesh.faces));
  const Eigen::VectorXd sph = normalized(face_areas(map.positions, mesh.faces));

  AreaDistortionMap out;
  out.epsilon_face = (sph.array() / in.array()).log();
  Eigen::VectorXd ring_in = Eigen::VectorXd::Zero(mesh.vertex_count());
  Eigen::VectorXd ring_sph = Eigen::VectorXd::Zero(mesh.vertex_count());
  for (int f = 0; f < mesh.face_count(); ++f) {
    for (int c = 0; c < 3; ++c) {
      ring_in[mesh.faces(f, c)] += in[f];
      ring_sph[mesh.faces(f, c)] += sph[f];
    }
  }
  out.epsilon_vertex.resize(mesh.vertex_count());
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    out.epsilon_vertex[v] = ring_in[v] > 0.0 ? std::log(ring_sph[v] / ring_in[v]) : 0.0;
  }
  return out;
}

void write_energy_log(const SphericalMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  out << "iteration energy\n";
  char buf[64];
  for (std::size_t i = 0; i < map.energy_history.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", map.energy_history[i]);
    out << i << ' ' << buf << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

}  // namespace cir
