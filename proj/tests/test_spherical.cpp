#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "cir/error.hpp"
#include "cir/phantoms.hpp"
#include "cir/spherical.hpp"
#include "oracles.hpp"

using namespace cir;

namespace {

// Best rotation taking rows of `from` onto rows of `to` (Kabsch).
Eigen::Matrix3d align(const Vertices& from, const Vertices& to) {
  const Eigen::Matrix3d h = from.transpose() * to;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() > 0 ? 1.0 : -1.0;
  return svd.matrixV() * d * svd.matrixU().transpose();
}

Eigen::Matrix3d rotation(double ax, double ay, double az) {
  return (Eigen::AngleAxisd(az, Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(ay, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(ax, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

void check_map_invariants(const TriMesh& mesh, const SphericalMap& map) {
  for (int v = 0; v < mesh.vertex_count(); ++v) REQUIRE(std::abs(map.positions.row(v).norm() - 1.0) <= 1e-9);
  CHECK(count_flipped_faces(map.positions, mesh.faces) == 0);
  for (std::size_t i = 1; i < map.energy_history.size(); ++i) {
    REQUIRE(map.energy_history[i] <= map.energy_history[i - 1]);
  }
  CHECK(surface_centroid(map.positions, mesh.faces).norm() < 1e-3);
}

}  // namespace

TEST_CASE("icosphere maps onto itself up to rotation") {
  const TriMesh m = phantom::icosphere(3, 2.5);
  const SphericalMap map = parameterize(m);
  check_map_invariants(m, map);
  CHECK(map.iterations_used < 20);
  Vertices dirs = m.vertices.rowwise().normalized();
  const Eigen::Matrix3d r = align(dirs, map.positions);
  const Vertices rotated = dirs * r.transpose();
  CHECK((rotated - map.positions).rowwise().norm().maxCoeff() < 0.05);

  const AreaDistortionMap adm = area_distortion(m, map);
  CHECK(adm.epsilon_vertex.cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("identity map has zero distortion and is scale invariant") {
  const TriMesh m = phantom::icosphere(2, 1.0);
  SphericalMap identity;
  identity.positions = m.vertices;
  const AreaDistortionMap adm = area_distortion(m, identity);
  CHECK(adm.epsilon_face.cwiseAbs().maxCoeff() < 1e-9);

  const TriMesh bumpy = phantom::radial_mesh(3, phantom::random_star(1.0, 4));
  const SphericalMap map = parameterize(bumpy);
  const TriMesh scaled = phantom::transformed(bumpy, 10.0 * Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero());
  const AreaDistortionMap a = area_distortion(bumpy, map);
  const AreaDistortionMap b = area_distortion(scaled, map);
  CHECK((a.epsilon_vertex - b.epsilon_vertex).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("area normalization identity") {
  const TriMesh m = phantom::radial_mesh(3, phantom::random_star(5.0, 12));
  const SphericalMap map = parameterize(m);
  const AreaDistortionMap adm = area_distortion(m, map);
  const Eigen::VectorXd a = face_areas(m.vertices, m.faces);
  const double sum = (a.array() / a.sum() * adm.epsilon_face.array().exp()).sum();
  CHECK(std::abs(sum - 1.0) < 1e-9);
  CHECK(adm.epsilon_vertex.allFinite());
  CHECK(adm.epsilon_face.allFinite());
}

TEST_CASE("thin cone compresses onto a small cap") {
  const Eigen::Vector3d axis = phantom::icosphere_pole();
  const TriMesh m = phantom::radial_mesh(4, phantom::sphere_with_cone(10.0, axis, 8.0, 15.0));
  const SphericalMap map = parameterize(m);
  check_map_invariants(m, map);
  const AreaDistortionMap adm = area_distortion(m, map);

  Eigen::Index argmin = 0;
  const double min_eps = adm.epsilon_vertex.minCoeff(&argmin);
  CHECK(min_eps < -0.5);
  // The minimum sits on the cone: farther out than the base sphere.
  CHECK(m.vertex(static_cast<int>(argmin)).norm() > 10.0 + 1e-6);
  // The apex one-ring keeps under 5% of its normalized input share.
  CHECK(std::exp(adm.epsilon_vertex[0]) < 0.05);
}

TEST_CASE("rotating the input leaves distortion unchanged") {
  const TriMesh m = phantom::radial_mesh(3, phantom::random_star(3.0, 21));
  const TriMesh r = phantom::transformed(m, rotation(0.3, -1.1, 2.0), Eigen::Vector3d(4, -2, 7));
  const AreaDistortionMap a = area_distortion(m, parameterize(m));
  const AreaDistortionMap b = area_distortion(r, parameterize(r));
  CHECK((a.epsilon_vertex - b.epsilon_vertex).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("precondition failures") {
  try {
    parameterize(phantom::torus(3.0, 1.0, 16, 8));
    FAIL("expected NotGenusZero");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotGenusZero);
  }
  TriMesh open = phantom::cube();
  open.faces.conservativeResize(10, 3);
  try {
    parameterize(open);
    FAIL("expected NonManifold");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonManifold);
  }
  const TriMesh m = phantom::icosphere(1);
  SphericalMap wrong;
  wrong.positions = Vertices::Zero(3, 3);
  try {
    area_distortion(m, wrong);
    FAIL("expected ConnectivityMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConnectivityMismatch);
  }
}

TEST_CASE("intrinsic Delaunay weights are non-negative") {
  const TriMesh m = phantom::radial_mesh(3, phantom::random_star(2.0, 5));
  const WeightedEdges w = intrinsic_delaunay_weights(m);
  CHECK(w.weights.minCoeff() >= 0.0);
  CHECK(std::is_sorted(w.pairs.begin(), w.pairs.end()));
}

TEST_CASE("flipped triangulation keeps the Dirichlet energy of a linear field") {
  // Planar 3x3 grid with the center vertex pulled toward a corner, which makes
  // interior edges non-Delaunay while every boundary angle stays acute. On a
  // plane the energy of f(x) = x is the area under any triangulation.
  TriMesh plane;
  plane.vertices.resize(9, 3);
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < 3; ++i) plane.vertices.row(3 * j + i) << i, j, 0.0;
  }
  plane.vertices.row(4) << 1.6, 1.5, 0.0;
  plane.faces.resize(8, 3);
  int f = 0;
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 2; ++i) {
      const int a = 3 * j + i;
      plane.faces.row(f++) << a, a + 1, a + 4;
      plane.faces.row(f++) << a, a + 4, a + 3;
    }
  }
  Vertices linear = Vertices::Zero(9, 3);
  linear.col(0) = plane.vertices.col(0);
  const WeightedEdges w = intrinsic_delaunay_weights(plane);
  CHECK(w.weights.minCoeff() >= 0.0);
  CHECK(harmonic_energy(linear, w) == doctest::Approx(surface_area(plane)).epsilon(1e-9));
  // Clamping the original weights instead loses the identity.
  const auto topo = build_topology(plane);
  CHECK(harmonic_energy(linear, topo, cotangent_weights(plane, topo)) > surface_area(plane) + 0.5);
}

TEST_CASE("Mobius centering keeps points on the sphere") {
  TriMesh m = phantom::icosphere(3);
  Vertices p = m.vertices;
  // Crowd everything toward +z.
  for (int v = 0; v < p.rows(); ++v) {
    p(v, 2) += 1.8;
    p.row(v).normalize();
  }
  REQUIRE(surface_centroid(p, m.faces).norm() > 0.1);
  const double residual = mobius_center(p, m.faces);
  CHECK(residual < 1e-6);
  for (int v = 0; v < p.rows(); ++v) CHECK(std::abs(p.row(v).norm() - 1.0) < 1e-12);
}

TEST_CASE("energy log") {
  const auto dir = oracle::scratch("energy");
  const TriMesh m = phantom::radial_mesh(2, phantom::random_star(1.0, 3));
  const SphericalMap map = parameterize(m);
  write_energy_log(map, dir / "e.txt");
  std::ifstream in(dir / "e.txt");
  std::string header;
  std::getline(in, header);
  CHECK(header == "iteration energy");
  int lines = 0;
  std::string line;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == static_cast<int>(map.energy_history.size()));
}

TEST_CASE("invalid options") {
  ParamOptions o;
  o.step = 0.0;
  try {
    parameterize(phantom::icosphere(1), o);
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidConfig);
  }
}
