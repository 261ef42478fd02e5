#include "cir/spikes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>

#include "cir/error.hpp"
#include "cir/point_grid.hpp"

namespace cir {

std::string_view to_string(SpikeClass c) {
  switch (c) {
    case SpikeClass::Unclassified: return "unclassified";
    case SpikeClass::Spiculation: return "spiculation";
    case SpikeClass::Lobulation: return "lobulation";
    case SpikeClass::Other: return "other";
  }
  return "unknown";
}

Spike measure_spike(const TriMesh& mesh, const MeshTopology& topo, const Eigen::VectorXd& epsilon,
                    std::vector<int> vertex_ids) {
  Spike s;
  std::sort(vertex_ids.begin(), vertex_ids.end());
  s.vertex_ids = std::move(vertex_ids);
  if (s.vertex_ids.empty()) return s;

  std::vector<char> member(mesh.vertex_count(), 0);
  for (int v : s.vertex_ids) member[v] = 1;
  s.apex_id = s.vertex_ids.front();
  double eps_sum = 0.0;
  std::vector<int> boundary;
  for (int v : s.vertex_ids) {
    eps_sum += epsilon[v];
    if (epsilon[v] < epsilon[s.apex_id]) s.apex_id = v;
    const bool on_boundary =
        std::any_of(topo.neighbors[v].begin(), topo.neighbors[v].end(), [&](int u) { return !member[u]; });
    if (on_boundary) boundary.push_back(v);
  }
  s.mean_epsilon = eps_sum / static_cast<double>(s.vertex_ids.size());
  if (boundary.empty()) boundary = s.vertex_ids;

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (int v : boundary) centroid += mesh.vertex(v);
  centroid /= static_cast<double>(boundary.size());

  Eigen::Vector3d normal;
  if (boundary.size() >= 3) {
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int v : boundary) {
      const Eigen::Vector3d d = mesh.vertex(v) - centroid;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    normal = eig.eigenvectors().col(0);
  } else {
    const Vertices normals = vertex_normals(mesh, topo);
    normal = Eigen::Vector3d::Zero();
    for (int v : s.vertex_ids) normal += normals.row(v).transpose();
    if (normal.norm() == 0.0) normal = Eigen::Vector3d::UnitZ();
    normal.normalize();
  }

  s.height_mm = std::abs(normal.dot(mesh.vertex(s.apex_id) - centroid));
  double radius = 0.0;
  for (int v : boundary) radius += (mesh.vertex(v) - centroid).norm();
  radius /= static_cast<double>(boundary.size());
  s.base_radius_mm = std::max(radius, std::numeric_limits<double>::min());

  double angle = 2.0 * std::atan2(s.base_radius_mm, s.height_mm) * 180.0 / std::numbers::pi;
  s.apex_angle_deg = std::clamp(angle, std::nextafter(0.0, 1.0), std::nextafter(180.0, 0.0));
  return s;
}

std::vector<Spike> detect_spikes(const TriMesh& mesh, const AreaDistortionMap& adm, const SpikeOptions& options) {
  const int nv = mesh.vertex_count();
  if (adm.epsilon_vertex.size() != nv) {
    throw Error(ErrorCode::ConnectivityMismatch, "area distortion map does not match the mesh");
  }
  const auto topo = build_topology(mesh);
  const auto& eps = adm.epsilon_vertex;

  std::vector<int> component(nv, -1);
  std::vector<Spike> spikes;
  for (int seed = 0; seed < nv; ++seed) {
    if (component[seed] >= 0 || !(eps[seed] <= options.noise_floor)) continue;
    const int id = static_cast<int>(spikes.size());
    std::vector<int> members;
    std::queue<int> queue;
    queue.push(seed);
    component[seed] = id;
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop();
      members.push_back(v);
      for (int u : topo.neighbors[v]) {
        if (component[u] < 0 && eps[u] <= options.noise_floor) {
          component[u] = id;
          queue.push(u);
        }
      }
    }
    Spike s = measure_spike(mesh, topo, eps, std::move(members));
    if (static_cast<int>(s.vertex_ids.size()) < options.min_vertices) s.cls = SpikeClass::Other;
    spikes.push_back(std::move(s));
  }
  std::stable_sort(spikes.begin(), spikes.end(), [&](const Spike& a, const Spike& b) {
    return eps[a.apex_id] != eps[b.apex_id] ? eps[a.apex_id] < eps[b.apex_id] : a.apex_id < b.apex_id;
  });
  return spikes;
}

SpikeClass classify_spike(const Spike& spike, const SpikeOptions& options) {
  if (static_cast<int>(spike.vertex_ids.size()) < options.min_vertices || spike.height_mm < options.min_height_mm) {
    return SpikeClass::Other;
  }
  return spike.apex_angle_deg < options.theta_spic_deg ? SpikeClass::Spiculation : SpikeClass::Lobulation;
}

NoduleAnnotation annotate(const TriMesh& mesh, const AreaDistortionMap& adm, const SpikeOptions& options) {
  NoduleAnnotation ann;
  ann.spikes = detect_spikes(mesh, adm, options);
  ann.vertex_class = Eigen::VectorXi::Constant(mesh.vertex_count(), vertex_class::kBase);

  double angle_sum = 0.0;
  for (auto& s : ann.spikes) {
    s.cls = classify_spike(s, options);
    int label = vertex_class::kBase;
    if (s.cls == SpikeClass::Spiculation) {
      ++ann.summary.n_spiculations;
      angle_sum += s.apex_angle_deg;
      label = vertex_class::kSpiculation;
    } else if (s.cls == SpikeClass::Lobulation) {
      ++ann.summary.n_lobulations;
      label = vertex_class::kLobulation;
    }
    for (int v : s.vertex_ids) ann.vertex_class[v] = label;
  }
  if (ann.summary.n_spiculations > 0) {
    ann.summary.mean_apex_angle_spiculation_deg = angle_sum / ann.summary.n_spiculations;
  }

  const auto topo = build_topology(mesh);
  const Eigen::VectorXd ring = one_ring_areas(mesh, topo);
  std::array<double, 3> share{0.0, 0.0, 0.0};
  for (int v = 0; v < mesh.vertex_count(); ++v) share[ann.vertex_class[v]] += ring[v];
  const double total = share[0] + share[1] + share[2];
  if (total > 0.0) {
    ann.summary.base_area_fraction = share[0] / total;
    ann.summary.spiculation_area_fraction = share[1] / total;
    ann.summary.lobulation_area_fraction = share[2] / total;
  }
  ann.summary.min_epsilon = mesh.vertex_count() > 0 ? adm.epsilon_vertex.minCoeff() : 0.0;
  return ann;
}

namespace {

// Closest point on triangle (a, b, c) to p.
Eigen::Vector3d closest_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                                    const Eigen::Vector3d& c) {
  const Eigen::Vector3d ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

std::array<int, 2> index_range(double lo, double hi, double origin, double spacing, int n) {
  const int i0 = std::max(0, static_cast<int>(std::ceil((lo - origin) / spacing)));
  const int i1 = std::min(n - 1, static_cast<int>(std::floor((hi - origin) / spacing)));
  return {i0, i1};
}

}  // namespace

std::vector<char> inside_mask(const TriMesh& mesh, const MaskVolume& grid) {
  const auto& d = grid.dims;
  std::vector<char> inside(grid.voxel_count(), 0);
  const int nf = mesh.face_count();

  // Edge function with a canonical vertex order so both faces sharing an edge
  // see exactly opposite values.
  auto edge_fn = [&](int ia, int ib, double py, double pz) {
    const bool swap = ia > ib;
    const int a = swap ? ib : ia;
    const int b = swap ? ia : ib;
    const double v = (mesh.vertices(b, 1) - mesh.vertices(a, 1)) * (pz - mesh.vertices(a, 2)) -
                     (mesh.vertices(b, 2) - mesh.vertices(a, 2)) * (py - mesh.vertices(a, 1));
    return swap ? -v : v;
  };

  std::vector<std::vector<int>> rows(static_cast<std::size_t>(d[1]) * d[2]);
  for (int f = 0; f < nf; ++f) {
    double ylo = 1e300, yhi = -1e300, zlo = 1e300, zhi = -1e300;
    for (int c = 0; c < 3; ++c) {
      ylo = std::min(ylo, mesh.vertices(mesh.faces(f, c), 1));
      yhi = std::max(yhi, mesh.vertices(mesh.faces(f, c), 1));
      zlo = std::min(zlo, mesh.vertices(mesh.faces(f, c), 2));
      zhi = std::max(zhi, mesh.vertices(mesh.faces(f, c), 2));
    }
    const double pad_y = 1e-3 * grid.spacing[1];
    const double pad_z = 1e-3 * grid.spacing[2];
    const auto jr = index_range(ylo - pad_y, yhi + pad_y, grid.origin[1], grid.spacing[1], d[1]);
    const auto kr = index_range(zlo - pad_z, zhi + pad_z, grid.origin[2], grid.spacing[2], d[2]);
    for (int k = kr[0]; k <= kr[1]; ++k) {
      for (int j = jr[0]; j <= jr[1]; ++j) rows[static_cast<std::size_t>(k) * d[1] + j].push_back(f);
    }
  }

  std::vector<double> hits;
  for (int k = 0; k < d[2]; ++k) {
    for (int j = 0; j < d[1]; ++j) {
      const auto& candidates = rows[static_cast<std::size_t>(k) * d[1] + j];
      if (candidates.empty()) continue;
      // Rays through voxel centers would pass exactly through marching-cubes
      // vertices; offset them by small incommensurate amounts.
      for (int attempt = 0;; ++attempt) {
        const double py = grid.origin[1] + grid.spacing[1] * (j + 1.2345678e-4 * (attempt + 1) * 0.7548776662);
        const double pz = grid.origin[2] + grid.spacing[2] * (k + 2.3456789e-4 * (attempt + 1) * 0.5698402910);
        hits.clear();
        bool degenerate = false;
        for (int f : candidates) {
          const int i0 = mesh.faces(f, 0), i1 = mesh.faces(f, 1), i2 = mesh.faces(f, 2);
          const double w0 = edge_fn(i1, i2, py, pz);
          const double w1 = edge_fn(i2, i0, py, pz);
          const double w2 = edge_fn(i0, i1, py, pz);
          const bool pos = w0 > 0.0 && w1 > 0.0 && w2 > 0.0;
          const bool neg = w0 < 0.0 && w1 < 0.0 && w2 < 0.0;
          if (!pos && !neg) {
            const bool touches = (w0 == 0.0 || w1 == 0.0 || w2 == 0.0) &&
                                 ((w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0) || (w0 <= 0.0 && w1 <= 0.0 && w2 <= 0.0));
            if (touches) {
              degenerate = true;
              break;
            }
            continue;
          }
          const double sum = w0 + w1 + w2;
          hits.push_back((w0 * mesh.vertices(i0, 0) + w1 * mesh.vertices(i1, 0) + w2 * mesh.vertices(i2, 0)) / sum);
        }
        if (degenerate && attempt < 8) continue;
        std::sort(hits.begin(), hits.end());
        std::size_t h = 0;
        for (int i = 0; i < d[0]; ++i) {
          const double x = grid.origin[0] + grid.spacing[0] * i;
          while (h < hits.size() && hits[h] < x) ++h;
          if (h % 2 == 1) inside[grid.index(i, j, k)] = 1;
        }
        break;
      }
    }
  }
  return inside;
}

MaskVolume voxelize_annotation(const NoduleAnnotation& annotation, const TriMesh& mesh, const MaskVolume& grid) {
  if (annotation.vertex_class.size() != mesh.vertex_count()) {
    throw Error(ErrorCode::ConnectivityMismatch, "annotation does not match the mesh");
  }
  if (mesh.vertex_count() == 0) throw Error(ErrorCode::GridTooCoarse, "empty mesh");
  const Eigen::Vector3d lo = mesh.vertices.colwise().minCoeff().transpose();
  const Eigen::Vector3d hi = mesh.vertices.colwise().maxCoeff().transpose();
  for (int a = 0; a < 3; ++a) {
    if ((hi[a] - lo[a]) / grid.spacing[a] < 3.0) {
      throw Error(ErrorCode::GridTooCoarse, "mesh spans fewer than 3 voxels along axis " + std::to_string(a));
    }
  }

  MaskVolume out(grid.dims, grid.spacing, grid.origin);
  out.label_alphabet = {label::kBackground, label::kNoduleBase, label::kSpiculation, label::kLobulation};
  const auto inside = inside_mask(mesh, grid);
  for (std::size_t i = 0; i < inside.size(); ++i) {
    if (inside[i]) out.labels[i] = label::kNoduleBase;
  }

  const double reach = 0.5 * grid.spacing.norm();
  std::vector<char> band(grid.voxel_count(), 0);
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Eigen::Vector3d a = mesh.vertex(mesh.faces(f, 0));
    const Eigen::Vector3d b = mesh.vertex(mesh.faces(f, 1));
    const Eigen::Vector3d c = mesh.vertex(mesh.faces(f, 2));
    const Eigen::Vector3d flo = a.cwiseMin(b).cwiseMin(c).array() - reach;
    const Eigen::Vector3d fhi = a.cwiseMax(b).cwiseMax(c).array() + reach;
    const auto ir = index_range(flo[0], fhi[0], grid.origin[0], grid.spacing[0], grid.dims[0]);
    const auto jr = index_range(flo[1], fhi[1], grid.origin[1], grid.spacing[1], grid.dims[1]);
    const auto kr = index_range(flo[2], fhi[2], grid.origin[2], grid.spacing[2], grid.dims[2]);
    for (int k = kr[0]; k <= kr[1]; ++k) {
      for (int j = jr[0]; j <= jr[1]; ++j) {
        for (int i = ir[0]; i <= ir[1]; ++i) {
          const std::size_t idx = grid.index(i, j, k);
          if (band[idx]) continue;
          const Eigen::Vector3d p = grid.voxel_center(i, j, k);
          if ((closest_on_triangle(p, a, b, c) - p).squaredNorm() <= reach * reach) band[idx] = 1;
        }
      }
    }
  }

  const PointGrid<double> vertices(mesh.vertices);
  const double slack = 1e-12 * reach * reach;
  for (int k = 0; k < grid.dims[2]; ++k) {
    for (int j = 0; j < grid.dims[1]; ++j) {
      for (int i = 0; i < grid.dims[0]; ++i) {
        const std::size_t idx = grid.index(i, j, k);
        if (!band[idx]) continue;
        int cls = vertex_class::kBase;
        bool lob = false;
        for (auto v : vertices.nearest_ties(grid.voxel_center(i, j, k), slack)) {
          const int c = annotation.vertex_class[v];
          if (c == vertex_class::kSpiculation) cls = c;
          if (c == vertex_class::kLobulation) lob = true;
        }
        if (cls != vertex_class::kSpiculation && lob) cls = vertex_class::kLobulation;
        if (cls == vertex_class::kSpiculation) {
          out.labels[idx] = label::kSpiculation;
        } else if (cls == vertex_class::kLobulation) {
          out.labels[idx] = label::kLobulation;
        } else if (inside[idx]) {
          out.labels[idx] = label::kNoduleBase;
        }
      }
    }
  }
  return out;
}

}  // namespace cir
