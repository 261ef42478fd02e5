// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "cir/malignancy.hpp"
#include "cir/metrics.hpp"
#include "cir/phantoms.hpp"
#include "cir/pipeline.hpp"
#include "cir/spherical.hpp"
#include "cir/spikes.hpp"
#include "cli.hpp"
#include "oracles.hpp"

using namespace cir;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  std::cout << (o.ok ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  if (!o.ok) ++failures;
}

int count_class(const NoduleAnnotation& a, SpikeClass c) {
  int n = 0;
  for (const auto& s : a.spikes) n += s.cls == c;
  return n;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome sphere() {
  // Mesh-level distortion on an exact icosphere, then the full pipeline on a
  // voxelized sphere.
  const TriMesh m = phantom::icosphere(4, 8.0);
  const SphericalMap map = parameterize(m);
  const AreaDistortionMap adm = area_distortion(m, map);
  const double max_eps = adm.epsilon_vertex.cwiseAbs().maxCoeff();
  const auto mesh_spikes = detect_spikes(m, adm);

  const auto t0 = Clock::now();
  const MaskVolume mask =
      phantom::rasterize_centered(phantom::inside_profile([](const Eigen::Vector3d&) { return 6.0; }), 9.0, 0.5);
  const AnnotateResult r = annotate_volume(mask, PipelineConfig{});
  const double t = seconds_since(t0);
  const int mask_spikes = r.annotation.summary.n_spiculations + r.annotation.summary.n_lobulations;

  std::ostringstream d;
  d << "max|eps|=" << max_eps << " mesh_spikes=" << mesh_spikes.size() << " mask_spikes=" << mask_spikes
    << " mask_other_components=" << count_class(r.annotation, SpikeClass::Other) << " end_to_end=" << t << "s";
  return {max_eps < 0.05 && mesh_spikes.empty() && mask_spikes == 0 && t < 10.0, d.str()};
}

Outcome cone() {
  const Eigen::Vector3d pole = phantom::icosphere_pole();
  const auto profile = phantom::sphere_with_cone(10.0, pole, 8.0, 15.0);
  const TriMesh m = phantom::radial_mesh(5, profile);
  const AreaDistortionMap adm = area_distortion(m, parameterize(m));
  const NoduleAnnotation a = annotate(m, adm);
  const int spic = count_class(a, SpikeClass::Spiculation);
  const int lob = count_class(a, SpikeClass::Lobulation);
  int apex = -1;
  double angle = 0.0;
  for (const auto& s : a.spikes) {
    if (s.cls == SpikeClass::Spiculation) {
      apex = s.apex_id;
      angle = s.apex_angle_deg;
    }
  }
  // Vertex 0 of the radial mesh lies on the pole, i.e. the cone tip.
  const double tip_error = apex >= 0 ? (m.vertex(apex) - 18.0 * pole).norm() : -1.0;
  const MaskVolume grid = phantom::rasterize_centered(phantom::inside_profile(profile), 19.0, 0.5);
  const MaskVolume vox = voxelize_annotation(a, m, grid);
  const std::size_t label2 = vox.count_label(label::kSpiculation);

  std::ostringstream d;
  d << "spiculations=" << spic << " lobulations=" << lob << " apex=" << apex << " tip_error=" << tip_error
    << " angle=" << angle << " label2_voxels=" << label2;
  return {spic == 1 && lob == 0 && apex >= 0 && tip_error < 1e-9 && label2 > 0, d.str()};
}

Outcome bump() {
  const TriMesh m = phantom::radial_mesh(5, phantom::sphere_with_bump(10.0, phantom::icosphere_pole(), 4.0));
  const NoduleAnnotation a = annotate(m, area_distortion(m, parameterize(m)));
  const int spic = count_class(a, SpikeClass::Spiculation);
  const int lob = count_class(a, SpikeClass::Lobulation);
  std::ostringstream d;
  d << "spiculations=" << spic << " lobulations=" << lob;
  if (lob == 1) {
    for (const auto& s : a.spikes) {
      if (s.cls == SpikeClass::Lobulation) d << " angle=" << s.apex_angle_deg;
    }
  }
  return {spic == 0 && lob == 1, d.str()};
}

Outcome star_invariants() {
  int passed = 0;
  double worst_norm = 0.0, worst_area = 0.0;
  int flips = 0;
  bool monotone = true;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const TriMesh m = phantom::radial_mesh(3, phantom::random_star(2.0 + 0.2 * static_cast<double>(seed), seed));
    const SphericalMap map = parameterize(m);
    const AreaDistortionMap adm = area_distortion(m, map);
    const double norm_err = (map.positions.rowwise().norm().array() - 1.0).abs().maxCoeff();
    const int f = count_flipped_faces(map.positions, m.faces);
    bool mono = true;
    for (std::size_t i = 1; i < map.energy_history.size(); ++i) {
      mono = mono && map.energy_history[i] <= map.energy_history[i - 1];
    }
    const Eigen::VectorXd a = face_areas(m.vertices, m.faces);
    const double area_err = std::abs((a.array() / a.sum() * adm.epsilon_face.array().exp()).sum() - 1.0);
    worst_norm = std::max(worst_norm, norm_err);
    worst_area = std::max(worst_area, area_err);
    flips += f;
    monotone = monotone && mono;
    passed += norm_err <= 1e-9 && f == 0 && mono && area_err < 1e-9;
  }
  std::ostringstream d;
  d << passed << "/50 worst_norm_error=" << worst_norm << " flipped=" << flips << " monotone=" << monotone
    << " worst_area_error=" << worst_area;
  return {passed == 50, d.str()};
}

Outcome metric_oracles() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> n(1, 64), side(1, 4), level(0, 9), lab(0, 3);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const bool lattice = trial % 2 == 0;
    const Vertices a = oracle::random_points(rng, n(rng), lattice);
    const Vertices b = oracle::random_points(rng, n(rng), lattice);
    mismatches += chamfer_weighted_symmetric(a, b) != oracle::chamfer(a, b);

    MaskVolume va({side(rng), side(rng), side(rng)}, Eigen::Vector3d::Ones());
    MaskVolume vb = va;
    for (auto& l : va.labels) l = static_cast<std::uint8_t>(lab(rng));
    for (auto& l : vb.labels) l = static_cast<std::uint8_t>(lab(rng));
    for (int c = 0; c <= 3; ++c) {
      mismatches += jaccard(va, vb, static_cast<std::uint8_t>(c)) != oracle::jaccard(va.labels, vb.labels, c);
    }

    const int size = std::max(2, n(rng));
    BinaryOutcomes o;
    o.scores.resize(size);
    o.labels.resize(size);
    for (int i = 0; i < size; ++i) {
      o.scores[i] = level(rng) / 9.0;
      o.labels[i] = static_cast<int>(rng() % 2);
    }
    o.labels[0] = 1;
    o.labels[1] = 0;
    o.threshold = level(rng) / 9.0;
    mismatches += roc_auc(o) != oracle::auc(o.scores, o.labels);
    const auto m = binary_metrics(o);
    const auto c = oracle::confusion(o.scores, o.labels, o.threshold);
    mismatches += m.tp != c.tp || m.fp != c.fp || m.tn != c.tn || m.fn != c.fn;
  }
  return {mismatches == 0, "100 instances, mismatches=" + std::to_string(mismatches)};
}

Outcome loss_sum() {
  std::map<std::string, double> unit;
  for (const auto& name : loss_component_names()) unit[name] = 1.0;
  const double total = total_loss(unit);
  std::ostringstream d;
  d.precision(17);
  d << "total=" << total;
  return {total == 6.2, d.str()};
}

Outcome shapes() {
  const auto br = geometric_branch_features(phantom::icosphere(4, 5.0));
  const MeshFeatureVector f = assemble_mesh_features(br);
  const Eigen::VectorXd h = concat_hybrid(Eigen::VectorXd::Zero(kEncoderFeatureLength), f);
  const bool dims_ok = zero_mlp(kMeshOnlyDims).dims() == std::vector<int>{96000, 512, 128, 2} &&
                       zero_mlp(kHybridDims).dims() == std::vector<int>{112384, 512, 128, 2};

  std::mt19937_64 rng(5);
  std::normal_distribution<float> g(0.0f, 0.05f);
  MlpWeights w = zero_mlp(kMeshOnlyDims);
  for (auto& l : w.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = g(rng);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = g(rng);
  }
  const Prediction p = mlp_forward(f.values, w);
  const double sum_err = std::abs(p.p_benign + p.p_malignant - 1.0);

  std::ostringstream d;
  d << "mesh=" << f.values.size() << " hybrid=" << h.size() << " mlp_dims=" << (dims_ok ? "ok" : "bad")
    << " softmax_sum_error=" << sum_err;
  return {f.values.size() == 96000 && h.size() == 112384 && dims_ok && sum_err < 1e-6, d.str()};
}

Outcome round_trip() {
  const MaskVolume mask =
      phantom::rasterize_centered(phantom::inside_profile(phantom::random_star(6.0, 31)), 12.0, 0.5);
  const AnnotateResult r = annotate_volume(mask, PipelineConfig{});
  const double j = jaccard_foreground(r.masks, r.grid);
  std::ostringstream d;
  d << "jaccard=" << j << " spiculations=" << r.annotation.summary.n_spiculations
    << " lobulations=" << r.annotation.summary.n_lobulations;
  return {j >= 0.9, d.str()};
}

Outcome performance() {
  const auto profile = phantom::union_of({phantom::sphere_with_cone(8.0, Eigen::Vector3d::UnitZ(), 8.0, 15.0),
                                          phantom::sphere_with_bump(8.0, -Eigen::Vector3d::UnitZ(), 3.0)});
  const MaskVolume mask = phantom::rasterize_centered(phantom::inside_profile(profile), 18.0, 0.5);
  const auto t0 = Clock::now();
  const AnnotateResult r = annotate_volume(mask, PipelineConfig{});
  const double t = seconds_since(t0);
  std::ostringstream d;
  d << "faces=" << r.mesh.face_count() << " seconds=" << t;
  return {r.mesh.face_count() >= 8000 && t < 60.0, d.str()};
}

Outcome determinism() {
  const fs::path dir = oracle::scratch("determinism");
  write_nrrd(phantom::rasterize_centered(phantom::inside_profile(phantom::random_star(5.0, 3)), 10.0, 0.5),
             dir / "a.nrrd");
  write_nrrd(phantom::rasterize_centered(
                 phantom::inside_profile(phantom::sphere_with_cone(6.0, Eigen::Vector3d::UnitX(), 6.0, 15.0)), 13.0,
                 0.5),
             dir / "b.nrrd");
  auto run = [&](const std::string& out, const std::string& jobs) {
    std::ostringstream o, e;
    return cli::run({"annotate", (dir / "a.nrrd").string(), (dir / "b.nrrd").string(), "-o", (dir / out).string(),
                     "-j", jobs},
                    o, e);
  };
  const int c1 = run("first", "1"), c2 = run("second", "1"), c3 = run("parallel", "2");
  int compared = 0, differ = 0;
  for (const char* c : {"a", "b"}) {
    for (const char* f : {"annotation.json", "mesh.ply", "masks.nrrd"}) {
      const std::string ref = slurp(dir / "first" / c / f);
      differ += ref.empty() || ref != slurp(dir / "second" / c / f) || ref != slurp(dir / "parallel" / c / f);
      ++compared;
    }
  }
  std::ostringstream d;
  d << "exit=" << c1 << "," << c2 << "," << c3 << " files=" << compared << " differing=" << differ;
  return {c1 == 0 && c2 == 0 && c3 == 0 && differ == 0, d.str()};
}

}  // namespace

int main() {
  report("sphere phantom", sphere);
  report("cone phantom", cone);
  report("bump phantom", bump);
  report("parameterization invariants", star_invariants);
  report("metric oracle equivalence", metric_oracles);
  report("total loss of unit components", loss_sum);
  report("shape contracts", shapes);
  report("voxelization round trip", round_trip);
  report("performance", performance);
  report("determinism", determinism);
  return failures == 0 ? 0 : 1;
}
