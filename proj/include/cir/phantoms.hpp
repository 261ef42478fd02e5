#pragma once

#include <cstdint>
#include <functional>

#include "cir/mesh.hpp"
#include "cir/volume.hpp"

namespace cir::phantom {

/// Subdivided icosahedron projected onto a sphere; level 0 has 20 faces.
TriMesh icosphere(int level, double radius = 1.0);

/// Unit cube [0,1]^3 as 12 outward triangles.
TriMesh cube();

/// Torus around the z axis with `nu` x `nv` quads split into triangles.
TriMesh torus(double major_radius, double minor_radius, int nu, int nv);

/// Regular tetrahedron with unit edges.
TriMesh tetrahedron();

/// Radial profile: distance from the origin along unit direction `u`.
using RadialProfile = std::function<double(const Eigen::Vector3d& u)>;

/// Icosphere whose vertices are moved along their direction to `profile(u)`.
TriMesh radial_mesh(int level, const RadialProfile& profile);

/// Sharp cone of the given half-angle on a sphere of radius `base_radius`,
/// apex at `base_radius + height` along `axis`.
RadialProfile sphere_with_cone(double base_radius, const Eigen::Vector3d& axis, double height,
                               double half_angle_deg);

/// Spherical cap bump of radius `bump_radius` centered on the sphere surface along `axis`.
RadialProfile sphere_with_bump(double base_radius, const Eigen::Vector3d& axis, double bump_radius);

/// max() of several profiles.
RadialProfile union_of(std::vector<RadialProfile> profiles);

/// Smooth random star-shaped surface: sphere plus a few Gaussian lumps; deterministic in `seed`.
RadialProfile random_star(double base_radius, std::uint64_t seed);

/// Unit direction of vertex 0 of an icosphere; radial phantoms put spike apexes here.
Eigen::Vector3d icosphere_pole();

/// Voxelizes `inside(p)` at voxel centers of the given grid.
MaskVolume rasterize(const std::function<bool(const Eigen::Vector3d&)>& inside, std::array<int, 3> dims,
                     const Eigen::Vector3d& spacing, const Eigen::Vector3d& origin);

/// Grid centered on the origin that covers a cube of half-width `half_extent`.
MaskVolume rasterize_centered(const std::function<bool(const Eigen::Vector3d&)>& inside, double half_extent,
                              double spacing);

/// Inside test for a star-shaped radial profile.
std::function<bool(const Eigen::Vector3d&)> inside_profile(RadialProfile profile);

/// Two disjoint icospheres; the first with `level_a`, the second with `level_b`.
TriMesh two_spheres(int level_a, int level_b);

/// Rigid transform / uniform scale helpers.
TriMesh transformed(const TriMesh& mesh, const Eigen::Matrix3d& linear, const Eigen::Vector3d& offset);

}  // namespace cir::phantom
