#include "cir/marching_cubes.hpp"

#include <algorithm>
#include <string>

#include "cir/error.hpp"

namespace cir {

namespace mc_detail {
namespace {

// Corner c sits at (c&1 ^ (c>>1)&1, (c>>1)&1, (c>>2)&1) in the usual numbering.
constexpr std::array<std::array<int, 3>, 8> kCorner{{
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}}};

constexpr std::array<std::array<int, 2>, 12> kEdge{{
    {0, 1}, {1, 2}, {3, 2}, {0, 3}, {4, 5}, {5, 6}, {7, 6}, {4, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7}}};

struct CubeFace {
  std::array<int, 4> corners;  // cyclic
  std::array<int, 3> normal;   // outward from the cube
};

constexpr std::array<CubeFace, 6> kFace{{
    {{0, 1, 2, 3}, {0, 0, -1}},
    {{4, 5, 6, 7}, {0, 0, 1}},
    {{0, 1, 5, 4}, {0, -1, 0}},
    {{3, 2, 6, 7}, {0, 1, 0}},
    {{0, 3, 7, 4}, {-1, 0, 0}},
    {{1, 2, 6, 5}, {1, 0, 0}},
}};

int edge_between(int a, int b) {
  for (int e = 0; e < 12; ++e) {
    if ((kEdge[e][0] == a && kEdge[e][1] == b) || (kEdge[e][0] == b && kEdge[e][1] == a)) return e;
  }
  return -1;
}

Eigen::Vector3d corner_pos(int c) { return Eigen::Vector3d(kCorner[c][0], kCorner[c][1], kCorner[c][2]); }

Eigen::Vector3d edge_mid(int e) { return 0.5 * (corner_pos(kEdge[e][0]) + corner_pos(kEdge[e][1])); }

bool edges_share_face(int e0, int e1) {
  for (const auto& f : kFace) {
    int hits = 0;
    for (int i = 0; i < 4; ++i) {
      const int e = edge_between(f.corners[i], f.corners[(i + 1) % 4]);
      hits += (e == e0) + (e == e1);
    }
    if (hits == 2) return true;
  }
  return false;
}

CubeCase build_case(int config) {
  auto inside = [config](int c) { return ((config >> c) & 1) != 0; };
  std::array<int, 12> next;
  std::array<int, 12> incoming{};
  next.fill(-1);

  auto add_segment = [&](int ea, int eb, const Eigen::Vector3d& out_dir, const Eigen::Vector3d& n) {
    // Orient so the surface (normal pointing out of the foreground) is
    // counter-clockwise seen from outside.
    const Eigen::Vector3d d = edge_mid(eb) - edge_mid(ea);
    if (n.dot(out_dir.cross(d)) > 0.0) std::swap(ea, eb);
    if (next[ea] != -1) throw Error(ErrorCode::NonManifoldOutput, "inconsistent case table");
    next[ea] = eb;
    ++incoming[eb];
  };

  for (const auto& f : kFace) {
    const Eigen::Vector3d n(f.normal[0], f.normal[1], f.normal[2]);
    std::vector<int> crossing;
    int n_inside = 0;
    for (int i = 0; i < 4; ++i) {
      const int a = f.corners[i];
      const int b = f.corners[(i + 1) % 4];
      n_inside += inside(a);
      if (inside(a) != inside(b)) crossing.push_back(edge_between(a, b));
    }
    if (crossing.empty()) continue;
    if (crossing.size() == 2) {
      Eigen::Vector3d in_c = Eigen::Vector3d::Zero();
      Eigen::Vector3d out_c = Eigen::Vector3d::Zero();
      for (int c : f.corners) (inside(c) ? in_c : out_c) += corner_pos(c);
      in_c /= n_inside;
      out_c /= 4 - n_inside;
      add_segment(crossing[0], crossing[1], out_c - in_c, n);
      continue;
    }
    // Ambiguous face: cut off each foreground corner separately.
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    for (int c : f.corners) center += 0.25 * corner_pos(c);
    for (int i = 0; i < 4; ++i) {
      const int c = f.corners[i];
      if (!inside(c)) continue;
      const int prev = f.corners[(i + 3) % 4];
      const int nxt = f.corners[(i + 1) % 4];
      add_segment(edge_between(prev, c), edge_between(c, nxt), center - corner_pos(c), n);
    }
  }

  CubeCase cc;
  std::array<bool, 12> used{};
  for (int e = 0; e < 12; ++e) {
    if (next[e] == -1 && incoming[e] == 0) continue;
    if (next[e] == -1 || incoming[e] != 1) throw Error(ErrorCode::NonManifoldOutput, "open loop in case table");
    if (used[e]) continue;
    std::vector<int> loop;
    for (int cur = e; !used[cur]; cur = next[cur]) {
      used[cur] = true;
      loop.push_back(cur);
    }
    cc.loops.push_back(loop);
  }

  for (std::size_t li = 0; li < cc.loops.size(); ++li) {
    const auto& loop = cc.loops[li];
    const int n = static_cast<int>(loop.size());
    if (n == 3) {
      cc.triangles.push_back({loop[0], loop[1], loop[2]});
      continue;
    }
    // A fan whose diagonals all run through the cube interior; a diagonal on a
    // cube face could coincide with one produced by the neighboring cube.
    int start = -1;
    for (int s = 0; s < n && start < 0; ++s) {
      bool ok = true;
      for (int k = 2; k < n - 1 && ok; ++k) ok = !edges_share_face(loop[s], loop[(s + k) % n]);
      if (ok) start = s;
    }
    if (start >= 0) {
      for (int k = 1; k < n - 1; ++k) {
        cc.triangles.push_back({loop[start], loop[(start + k) % n], loop[(start + k + 1) % n]});
      }
    } else {
      const int centroid = 12 + static_cast<int>(li);
      for (int k = 0; k < n; ++k) cc.triangles.push_back({centroid, loop[k], loop[(k + 1) % n]});
    }
  }
  return cc;
}

}  // namespace

const std::array<CubeCase, 256>& case_table() {
  static const std::array<CubeCase, 256> table = [] {
    std::array<CubeCase, 256> t;
    for (int c = 0; c < 256; ++c) t[c] = build_case(c);
    return t;
  }();
  return table;
}

}  // namespace mc_detail

TriMesh marching_cubes(const MaskVolume& vol, double iso) {
  vol.validate();
  if (!(iso > 0.0 && iso < 1.0)) throw Error(ErrorCode::InvalidVolume, "iso must lie in (0, 1) for label data");
  if (vol.count_foreground() == 0) throw Error(ErrorCode::EmptyMask, "mask has no foreground voxel");

  const auto& table = mc_detail::case_table();
  const std::array<int, 3> P{vol.dims[0] + 2, vol.dims[1] + 2, vol.dims[2] + 2};
  const auto padded_index = [&](int i, int j, int k) {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(P[0]) * (j + static_cast<std::size_t>(P[1]) * k);
  };
  std::vector<std::uint8_t> field(static_cast<std::size_t>(P[0]) * P[1] * P[2], 0);
  for (int k = 0; k < vol.dims[2]; ++k) {
    for (int j = 0; j < vol.dims[1]; ++j) {
      for (int i = 0; i < vol.dims[0]; ++i) {
        field[padded_index(i + 1, j + 1, k + 1)] = vol.at(i, j, k) != label::kBackground;
      }
    }
  }
  const auto grid_pos = [&](int i, int j, int k) {
    return Eigen::Vector3d(vol.origin + vol.spacing.cwiseProduct(Eigen::Vector3d(i - 1, j - 1, k - 1)));
  };

  std::vector<int> edge_vertex(field.size() * 3, -1);
  std::vector<Eigen::Vector3d> positions;
  std::vector<std::array<int, 3>> triangles;

  for (int k = 0; k + 1 < P[2]; ++k) {
    for (int j = 0; j + 1 < P[1]; ++j) {
      for (int i = 0; i + 1 < P[0]; ++i) {
        int config = 0;
        for (int c = 0; c < 8; ++c) {
          const auto& o = mc_detail::kCorner[c];
          if (field[padded_index(i + o[0], j + o[1], k + o[2])]) config |= 1 << c;
        }
        if (config == 0 || config == 255) continue;
        const auto& cc = table[config];

        std::array<int, 12> local{};
        local.fill(-1);
        auto vertex_for_edge = [&](int e) {
          if (local[e] >= 0) return local[e];
          const auto& a = mc_detail::kCorner[mc_detail::kEdge[e][0]];
          const auto& b = mc_detail::kCorner[mc_detail::kEdge[e][1]];
          const int axis = a[0] != b[0] ? 0 : (a[1] != b[1] ? 1 : 2);
          const std::array<int, 3> lo{i + std::min(a[0], b[0]), j + std::min(a[1], b[1]), k + std::min(a[2], b[2])};
          const std::size_t key = padded_index(lo[0], lo[1], lo[2]) * 3 + axis;
          if (edge_vertex[key] < 0) {
            std::array<int, 3> hi = lo;
            ++hi[axis];
            const double f_lo = field[padded_index(lo[0], lo[1], lo[2])];
            const double f_hi = field[padded_index(hi[0], hi[1], hi[2])];
            const double t = (iso - f_lo) / (f_hi - f_lo);
            const Eigen::Vector3d p_lo = grid_pos(lo[0], lo[1], lo[2]);
            const Eigen::Vector3d p_hi = grid_pos(hi[0], hi[1], hi[2]);
            edge_vertex[key] = static_cast<int>(positions.size());
            positions.push_back(p_lo + t * (p_hi - p_lo));
          }
          return local[e] = edge_vertex[key];
        };

        std::vector<int> centroid(cc.loops.size(), -1);
        auto vertex_for_slot = [&](int slot) {
          if (slot < 12) return vertex_for_edge(slot);
          const int li = slot - 12;
          if (centroid[li] < 0) {
            Eigen::Vector3d c = Eigen::Vector3d::Zero();
            for (int e : cc.loops[li]) c += positions[vertex_for_edge(e)];
            centroid[li] = static_cast<int>(positions.size());
            positions.push_back(c / static_cast<double>(cc.loops[li].size()));
          }
          return centroid[li];
        };
        for (const auto& tri : cc.triangles) {
          triangles.push_back({vertex_for_slot(tri[0]), vertex_for_slot(tri[1]), vertex_for_slot(tri[2])});
        }
      }
    }
  }

  TriMesh mesh;
  mesh.vertices.resize(static_cast<Eigen::Index>(positions.size()), 3);
  for (std::size_t v = 0; v < positions.size(); ++v) mesh.vertices.row(v) = positions[v].transpose();
  mesh.faces.resize(static_cast<Eigen::Index>(triangles.size()), 3);
  for (std::size_t f = 0; f < triangles.size(); ++f) {
    mesh.faces.row(f) << triangles[f][0], triangles[f][1], triangles[f][2];
  }
  try {
    validate_mesh(mesh, /*require_closed=*/true);
  } catch (const Error& e) {
    throw Error(ErrorCode::NonManifoldOutput, e.what());
  }
  return mesh;
}

}  // namespace cir
