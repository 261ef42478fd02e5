#include "cir/phantoms.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "cir/error.hpp"

namespace cir::phantom {

namespace {

TriMesh from_lists(const std::vector<Eigen::Vector3d>& v, const std::vector<std::array<int, 3>>& f) {
  TriMesh m;
  m.vertices.resize(static_cast<Eigen::Index>(v.size()), 3);
  for (std::size_t i = 0; i < v.size(); ++i) m.vertices.row(i) = v[i].transpose();
  m.faces.resize(static_cast<Eigen::Index>(f.size()), 3);
  for (std::size_t i = 0; i < f.size(); ++i) m.faces.row(i) << f[i][0], f[i][1], f[i][2];
  return m;
}

}  // namespace

TriMesh icosphere(int level, double radius) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> v{{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                                 {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<std::array<int, 3>> f{{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                    {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                    {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                    {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      if (auto it = mid.find(key); it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      return mid[key] = static_cast<int>(v.size()) - 1;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const int a = midpoint(tri[0], tri[1]);
      const int b = midpoint(tri[1], tri[2]);
      const int c = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  for (auto& p : v) p *= radius;
  return from_lists(v, f);
}

Eigen::Vector3d icosphere_pole() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  return Eigen::Vector3d(-1, t, 0).normalized();
}

TriMesh cube() {
  std::vector<Eigen::Vector3d> v{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                 {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  std::vector<std::array<int, 3>> f{{0, 2, 1}, {0, 3, 2}, {4, 5, 6}, {4, 6, 7}, {0, 1, 5}, {0, 5, 4},
                                    {3, 6, 2}, {3, 7, 6}, {0, 4, 7}, {0, 7, 3}, {1, 2, 6}, {1, 6, 5}};
  return from_lists(v, f);
}

TriMesh tetrahedron() {
  std::vector<Eigen::Vector3d> v{{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  for (auto& p : v) p /= std::sqrt(8.0);  // edge length 1
  std::vector<std::array<int, 3>> f{{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
  TriMesh m = from_lists(v, f);
  return m;
}

TriMesh torus(double major_radius, double minor_radius, int nu, int nv) {
  std::vector<Eigen::Vector3d> v;
  std::vector<std::array<int, 3>> f;
  const double two_pi = 2.0 * std::numbers::pi;
  for (int i = 0; i < nu; ++i) {
    const double u = two_pi * i / nu;
    for (int j = 0; j < nv; ++j) {
      const double w = two_pi * j / nv;
      const double r = major_radius + minor_radius * std::cos(w);
      v.emplace_back(r * std::cos(u), r * std::sin(u), minor_radius * std::sin(w));
    }
  }
  auto id = [&](int i, int j) { return (i % nu) * nv + (j % nv); };
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      f.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      f.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return from_lists(v, f);
}

TriMesh radial_mesh(int level, const RadialProfile& profile) {
  TriMesh m = icosphere(level, 1.0);
  for (int v = 0; v < m.vertex_count(); ++v) {
    const Eigen::Vector3d u = m.vertex(v).normalized();
    m.vertices.row(v) = (profile(u) * u).transpose();
  }
  return m;
}

RadialProfile sphere_with_cone(double base_radius, const Eigen::Vector3d& axis, double height,
                               double half_angle_deg) {
  const Eigen::Vector3d a = axis.normalized();
  const double beta = half_angle_deg * std::numbers::pi / 180.0;
  const double apex = base_radius + height;
  return [=](const Eigen::Vector3d& u) {
    const double alpha = std::acos(std::clamp(u.dot(a), -1.0, 1.0));
    if (alpha + beta >= 0.5 * std::numbers::pi) return base_radius;
    // Ray from the origin hits the cone surface x = (apex - y) tan(beta).
    const double r = apex * std::sin(beta) / std::sin(alpha + beta);
    return std::max(base_radius, r);
  };
}

RadialProfile sphere_with_bump(double base_radius, const Eigen::Vector3d& axis, double bump_radius) {
  const Eigen::Vector3d a = axis.normalized();
  return [=](const Eigen::Vector3d& u) {
    const double c = u.dot(a);
    const double disc = bump_radius * bump_radius - base_radius * base_radius * (1.0 - c * c);
    if (disc < 0.0 || c <= 0.0) return base_radius;
    return std::max(base_radius, base_radius * c + std::sqrt(disc));
  };
}

RadialProfile union_of(std::vector<RadialProfile> profiles) {
  return [profiles = std::move(profiles)](const Eigen::Vector3d& u) {
    double r = 0.0;
    for (const auto& p : profiles) r = std::max(r, p(u));
    return r;
  };
}

RadialProfile random_star(double base_radius, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int lumps = 2 + static_cast<int>(rng() % 5);
  std::vector<Eigen::Vector3d> dirs;
  std::vector<double> heights, widths;
  for (int k = 0; k < lumps; ++k) {
    Eigen::Vector3d d(gauss(rng), gauss(rng), gauss(rng));
    dirs.push_back(d.normalized());
    heights.push_back(base_radius * (0.05 + 0.5 * uni(rng)));
    widths.push_back(0.15 + 0.5 * uni(rng));
  }
  return [=](const Eigen::Vector3d& u) {
    double r = base_radius;
    for (int k = 0; k < lumps; ++k) {
      const double s = (1.0 - u.dot(dirs[k])) / (widths[k] * widths[k]);
      r += heights[k] * std::exp(-s);
    }
    return r;
  };
}

std::function<bool(const Eigen::Vector3d&)> inside_profile(RadialProfile profile) {
  return [profile = std::move(profile)](const Eigen::Vector3d& p) {
    const double r = p.norm();
    if (r == 0.0) return true;
    return r <= profile(p / r);
  };
}

MaskVolume rasterize(const std::function<bool(const Eigen::Vector3d&)>& inside, std::array<int, 3> dims,
                     const Eigen::Vector3d& spacing, const Eigen::Vector3d& origin) {
  MaskVolume vol(dims, spacing, origin);
  for (int k = 0; k < dims[2]; ++k) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int i = 0; i < dims[0]; ++i) {
        if (inside(vol.voxel_center(i, j, k))) vol.at(i, j, k) = label::kNoduleBase;
      }
    }
  }
  return vol;
}

MaskVolume rasterize_centered(const std::function<bool(const Eigen::Vector3d&)>& inside, double half_extent,
                              double spacing) {
  const int n = 2 * static_cast<int>(std::ceil(half_extent / spacing)) + 1;
  const double o = -spacing * (n - 1) / 2.0;
  return rasterize(inside, {n, n, n}, Eigen::Vector3d::Constant(spacing), Eigen::Vector3d::Constant(o));
}

TriMesh two_spheres(int level_a, int level_b) {
  TriMesh a = icosphere(level_a, 1.0);
  TriMesh b = icosphere(level_b, 1.0);
  TriMesh out;
  out.vertices.resize(a.vertex_count() + b.vertex_count(), 3);
  out.vertices.topRows(a.vertex_count()) = a.vertices;
  out.vertices.bottomRows(b.vertex_count()) = b.vertices.rowwise() + Eigen::RowVector3d(5.0, 0.0, 0.0);
  out.faces.resize(a.face_count() + b.face_count(), 3);
  out.faces.topRows(a.face_count()) = a.faces;
  out.faces.bottomRows(b.face_count()) = b.faces.array() + a.vertex_count();
  return out;
}

TriMesh transformed(const TriMesh& mesh, const Eigen::Matrix3d& linear, const Eigen::Vector3d& offset) {
  TriMesh out = mesh;
  out.vertices = (mesh.vertices * linear.transpose()).rowwise() + offset.transpose();
  return out;
}

}  // namespace cir::phantom
