#include <doctest.h>

#include <algorithm>
#include <set>

#include "cir/error.hpp"
#include "cir/marching_cubes.hpp"
#include "cir/metrics.hpp"
#include "cir/phantoms.hpp"
#include "cir/spikes.hpp"
#include "oracles.hpp"

using namespace cir;

namespace {

struct Analyzed {
  TriMesh mesh;
  AreaDistortionMap adm;
};

Analyzed analyze(const TriMesh& mesh) {
  return {mesh, area_distortion(mesh, parameterize(mesh))};
}

const Analyzed& cone_and_bump() {
  static const Analyzed a = [] {
    const Eigen::Vector3d pole = phantom::icosphere_pole();
    return analyze(phantom::radial_mesh(
        4, phantom::union_of({phantom::sphere_with_cone(10.0, pole, 8.0, 15.0), phantom::sphere_with_bump(10.0, -pole, 4.0)})));
  }();
  return a;
}

int vertex_near(const TriMesh& m, const Eigen::Vector3d& p) {
  int best = 0;
  for (int v = 1; v < m.vertex_count(); ++v) {
    if ((m.vertex(v) - p).norm() < (m.vertex(best) - p).norm()) best = v;
  }
  return best;
}

}  // namespace

TEST_CASE("clean sphere has no spikes") {
  const Analyzed a = analyze(phantom::icosphere(4, 7.0));
  CHECK(a.adm.epsilon_vertex.cwiseAbs().maxCoeff() < 0.02);
  CHECK(detect_spikes(a.mesh, a.adm).empty());
  const NoduleAnnotation ann = annotate(a.mesh, a.adm);
  CHECK(ann.summary.n_spiculations == 0);
  CHECK(ann.summary.n_lobulations == 0);
  CHECK(ann.summary.base_area_fraction == 1.0);
  CHECK(ann.summary.spiculation_area_fraction == 0.0);
  CHECK(ann.summary.lobulation_area_fraction == 0.0);
  CHECK(!ann.summary.mean_apex_angle_spiculation_deg);
  CHECK((ann.vertex_class.array() == vertex_class::kBase).all());
}

TEST_CASE("cone and bump give one spiculation and one lobulation") {
  const Analyzed& a = cone_and_bump();
  const auto spikes = detect_spikes(a.mesh, a.adm);
  std::vector<const Spike*> big;
  for (const auto& s : spikes) {
    if (static_cast<int>(s.vertex_ids.size()) >= 8) big.push_back(&s);
  }
  REQUIRE(big.size() == 2);

  // The apex of the sharpest spike is the cone tip vertex.
  const Eigen::Vector3d pole = phantom::icosphere_pole();
  const int tip = vertex_near(a.mesh, 18.0 * pole);
  CHECK(spikes.front().apex_id == tip);

  std::set<int> seen;
  for (const auto& s : spikes) {
    for (int v : s.vertex_ids) CHECK(seen.insert(v).second);  // pairwise disjoint
    CHECK(oracle::count_components(a.mesh, s.vertex_ids) == 1);
    CHECK(std::find(s.vertex_ids.begin(), s.vertex_ids.end(), s.apex_id) != s.vertex_ids.end());
    double lowest = 0.0;
    for (int v : s.vertex_ids) lowest = std::min(lowest, a.adm.epsilon_vertex[v]);
    CHECK(a.adm.epsilon_vertex[s.apex_id] == lowest);
    CHECK(s.height_mm >= 0.0);
    CHECK(s.base_radius_mm > 0.0);
    CHECK(s.apex_angle_deg > 0.0);
    CHECK(s.apex_angle_deg < 180.0);
  }
  for (std::size_t i = 1; i < spikes.size(); ++i) {
    CHECK(a.adm.epsilon_vertex[spikes[i - 1].apex_id] <= a.adm.epsilon_vertex[spikes[i].apex_id]);
  }

  CHECK(classify_spike(*big[0]) == SpikeClass::Spiculation);
  CHECK(big[0]->apex_angle_deg == doctest::Approx(30.0).epsilon(0.15));
  CHECK(classify_spike(*big[1]) == SpikeClass::Lobulation);

  const NoduleAnnotation ann = annotate(a.mesh, a.adm);
  CHECK(ann.summary.n_spiculations == 1);
  CHECK(ann.summary.n_lobulations == 1);
  CHECK(ann.vertex_class[tip] == vertex_class::kSpiculation);
  CHECK(ann.vertex_class[vertex_near(a.mesh, -14.0 * pole)] == vertex_class::kLobulation);
  const auto& s = ann.summary;
  CHECK(std::abs(s.base_area_fraction + s.spiculation_area_fraction + s.lobulation_area_fraction - 1.0) < 1e-9);
  CHECK(s.spiculation_area_fraction > 0.0);
  CHECK(s.lobulation_area_fraction > 0.0);
  REQUIRE(s.mean_apex_angle_spiculation_deg);
  CHECK(*s.mean_apex_angle_spiculation_deg == big[0]->apex_angle_deg);
}

TEST_CASE("classification thresholds") {
  Spike s;
  s.vertex_ids.resize(20);
  s.height_mm = 5.0;
  s.apex_angle_deg = 65.0;
  CHECK(classify_spike(s) == SpikeClass::Lobulation);  // boundary value
  s.apex_angle_deg = std::nextafter(65.0, 0.0);
  CHECK(classify_spike(s) == SpikeClass::Spiculation);
  s.height_mm = 0.99;
  CHECK(classify_spike(s) == SpikeClass::Other);
  s.height_mm = 5.0;
  s.vertex_ids.resize(3);
  CHECK(classify_spike(s) == SpikeClass::Other);
}

TEST_CASE("small components are other and stay base") {
  TriMesh m = phantom::icosphere(2, 1.0);
  AreaDistortionMap adm;
  adm.epsilon_vertex = Eigen::VectorXd::Constant(m.vertex_count(), 0.1);
  adm.epsilon_face = Eigen::VectorXd::Zero(m.face_count());
  // Vertex 0 and two of its neighbors.
  const auto topo = build_topology(m);
  adm.epsilon_vertex[0] = -1.0;
  adm.epsilon_vertex[topo.neighbors[0][0]] = -0.5;
  adm.epsilon_vertex[topo.neighbors[0][1]] = -0.5;
  const auto spikes = detect_spikes(m, adm);
  REQUIRE(spikes.size() == 1);
  CHECK(spikes[0].vertex_ids.size() == 3);
  CHECK(spikes[0].cls == SpikeClass::Other);
  const NoduleAnnotation ann = annotate(m, adm);
  CHECK((ann.vertex_class.array() == vertex_class::kBase).all());
  CHECK(ann.summary.n_spiculations == 0);
  CHECK(ann.summary.n_lobulations == 0);
}

TEST_CASE("lower noise floor never adds spike vertices") {
  const Analyzed& a = cone_and_bump();
  std::size_t previous = std::numeric_limits<std::size_t>::max();
  for (double floor : {-0.01, -0.02, -0.05, -0.2, -0.5, -1.0}) {
    SpikeOptions o;
    o.noise_floor = floor;
    std::size_t total = 0;
    for (const auto& s : detect_spikes(a.mesh, a.adm, o)) total += s.vertex_ids.size();
    CHECK(total <= previous);
    previous = total;
  }
}

TEST_CASE("rigid motion and uniform scaling keep the classes") {
  const Analyzed& a = cone_and_bump();
  const NoduleAnnotation ref = annotate(a.mesh, a.adm);
  const Eigen::Matrix3d r = Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  const TriMesh moved = phantom::transformed(a.mesh, r, Eigen::Vector3d(3, -4, 5));
  const NoduleAnnotation rigid = annotate(moved, a.adm);
  CHECK(rigid.vertex_class == ref.vertex_class);

  const TriMesh scaled = phantom::transformed(a.mesh, 2.5 * Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero());
  const NoduleAnnotation big = annotate(scaled, area_distortion(scaled, parameterize(a.mesh)));
  REQUIRE(big.spikes.size() == ref.spikes.size());
  for (std::size_t i = 0; i < ref.spikes.size(); ++i) {
    CHECK(big.spikes[i].height_mm == doctest::Approx(2.5 * ref.spikes[i].height_mm).epsilon(1e-6));
    CHECK(big.spikes[i].base_radius_mm == doctest::Approx(2.5 * ref.spikes[i].base_radius_mm).epsilon(1e-6));
    CHECK(std::abs(big.spikes[i].apex_angle_deg - ref.spikes[i].apex_angle_deg) < 1e-6);
  }
}

TEST_CASE("mismatched sizes") {
  const TriMesh m = phantom::icosphere(1);
  AreaDistortionMap adm;
  adm.epsilon_vertex = Eigen::VectorXd::Zero(3);
  try {
    detect_spikes(m, adm);
    FAIL("expected ConnectivityMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConnectivityMismatch);
  }
}

TEST_CASE("parity ray casting matches the analytic cube") {
  // Unit cube scaled to [0, 4.3]^3 shifted off the lattice.
  const TriMesh cube = phantom::transformed(phantom::cube(), 4.3 * Eigen::Matrix3d::Identity(), Eigen::Vector3d(0.27, 0.31, 0.19));
  MaskVolume grid({7, 7, 7}, Eigen::Vector3d::Ones(), Eigen::Vector3d::Zero());
  const auto inside = inside_mask(cube, grid);
  for (int k = 0; k < 7; ++k) {
    for (int j = 0; j < 7; ++j) {
      for (int i = 0; i < 7; ++i) {
        const Eigen::Vector3d p = grid.voxel_center(i, j, k);
        const bool expect = (p.array() > Eigen::Array3d(0.27, 0.31, 0.19)).all() &&
                            (p.array() < Eigen::Array3d(4.57, 4.61, 4.49)).all();
        CHECK(static_cast<bool>(inside[grid.index(i, j, k)]) == expect);
      }
    }
  }
}

TEST_CASE("voxelization partitions the grid and marks spiculations") {
  const Analyzed& a = cone_and_bump();
  const NoduleAnnotation ann = annotate(a.mesh, a.adm);
  MaskVolume grid = phantom::rasterize_centered([](const Eigen::Vector3d&) { return false; }, 20.0, 0.5);
  const MaskVolume out = voxelize_annotation(ann, a.mesh, grid);
  std::size_t total = 0;
  for (int l = 0; l <= 3; ++l) total += out.count_label(static_cast<std::uint8_t>(l));
  CHECK(total == out.voxel_count());
  CHECK(out.count_label(label::kSpiculation) > 0);
  CHECK(out.count_label(label::kLobulation) > 0);
  // The cone tip voxel carries the spiculation label.
  const Eigen::Vector3d tip = 17.5 * phantom::icosphere_pole();
  const Eigen::Vector3d idx = ((tip - grid.origin).array() / grid.spacing.array()).round();
  CHECK(out.at(static_cast<int>(idx[0]), static_cast<int>(idx[1]), static_cast<int>(idx[2])) == label::kSpiculation);

  // All-base annotation of the same mesh: no spike labels at all.
  NoduleAnnotation plain = ann;
  plain.vertex_class.setZero();
  const MaskVolume base = voxelize_annotation(plain, a.mesh, grid);
  CHECK(base.count_label(label::kSpiculation) == 0);
  CHECK(base.count_label(label::kLobulation) == 0);
  CHECK(base.count_label(label::kNoduleBase) > 0);
}

TEST_CASE("round trip of a blob mask") {
  const auto inside = phantom::inside_profile(phantom::random_star(6.0, 31));
  const MaskVolume mask = phantom::rasterize_centered(inside, 12.0, 0.5);
  const TriMesh mesh = largest_component(marching_cubes(mask));
  NoduleAnnotation ann;
  ann.vertex_class = Eigen::VectorXi::Zero(mesh.vertex_count());
  const MaskVolume out = voxelize_annotation(ann, mesh, mask);
  CHECK(jaccard_foreground(out, mask) >= 0.9);
}

TEST_CASE("grid too coarse") {
  const TriMesh m = phantom::icosphere(2, 1.0);
  NoduleAnnotation ann;
  ann.vertex_class = Eigen::VectorXi::Zero(m.vertex_count());
  MaskVolume grid({3, 3, 3}, Eigen::Vector3d::Constant(1.0), Eigen::Vector3d::Constant(-1.0));
  try {
    voxelize_annotation(ann, m, grid);
    FAIL("expected GridTooCoarse");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GridTooCoarse);
  }
}
