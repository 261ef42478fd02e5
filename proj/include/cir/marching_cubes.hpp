#pragma once

#include "cir/mesh.hpp"
#include "cir/volume.hpp"

namespace cir {

/// Closed, consistently oriented isosurface of the foreground (label != 0) of
/// `vol`, in physical coordinates. The volume is padded with one background
/// voxel per side. Ambiguous faces always separate foreground corners, which
/// makes neighboring cubes agree and the output watertight.
///
/// Throws Error(EmptyMask) when there is no foreground voxel.
TriMesh marching_cubes(const MaskVolume& vol, double iso = 0.5);

namespace mc_detail {

/// One case of the generated 256-entry table. Triangle slots < 12 name cube
/// edges; slot 12 + i names the centroid of loop i.
struct CubeCase {
  std::vector<std::vector<int>> loops;
  std::vector<std::array<int, 3>> triangles;
};

const std::array<CubeCase, 256>& case_table();

}  // namespace mc_detail

}  // namespace cir
