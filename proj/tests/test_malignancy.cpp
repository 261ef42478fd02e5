#include <doctest.h>

#include <fstream>
#include <random>
#include <set>

#include "cir/error.hpp"
#include "cir/malignancy.hpp"
#include "cir/phantoms.hpp"
#include "oracles.hpp"

using namespace cir;

namespace {

// Branch b, vertex v, feature k carries a value that encodes all three indices.
std::array<BranchFeatures, kBranches> tagged_branches(int rows) {
  std::array<BranchFeatures, kBranches> out;
  for (int b = 0; b < kBranches; ++b) {
    out[b].resize(rows, kBranchWidth);
    for (int v = 0; v < rows; ++v) {
      for (int k = 0; k < kBranchWidth; ++k) out[b](v, k) = 1 + v * 1000.0 + b * 100.0 + k;
    }
  }
  return out;
}

template <typename F>
void expect_code(ErrorCode code, F&& f) {
  try {
    f();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == code);
  }
}

MlpWeights random_mlp(std::mt19937_64& rng, const std::vector<int>& dims) {
  std::normal_distribution<float> g(0.0f, 0.5f);
  MlpWeights w = zero_mlp(dims);
  for (auto& l : w.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = g(rng);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = g(rng);
  }
  return w;
}

}  // namespace

TEST_CASE("shape constants") {
  CHECK(kMeshFeatureLength == 96000);
  CHECK(kEncoderFeatureLength == 16384);
  CHECK(kHybridFeatureLength == 112384);
  CHECK(kMeshOnlyDims == std::vector<int>{96000, 512, 128, 2});
  CHECK(kHybridDims == std::vector<int>{112384, 512, 128, 2});
  CHECK(zero_mlp(kMeshOnlyDims).dims() == kMeshOnlyDims);
}

TEST_CASE("feature layout is a bijection onto the flat vector") {
  std::set<int> seen;
  for (int v = 0; v < kSampledVertices; ++v) {
    for (int b = 0; b < kBranches; ++b) {
      for (int k = 0; k < kBranchWidth; ++k) {
        const int i = mesh_feature_index(v, b, k);
        REQUIRE(i >= 0);
        REQUIRE(i < kMeshFeatureLength);
        seen.insert(i);
      }
    }
  }
  CHECK(static_cast<int>(seen.size()) == kMeshFeatureLength);
}

TEST_CASE("short meshes are zero padded") {
  const auto f = assemble_mesh_features(tagged_branches(10));
  CHECK(f.values.size() == kMeshFeatureLength);
  CHECK(f.vertex_count_actual == 10);
  for (int v = 0; v < 10; ++v) {
    for (int b = 0; b < kBranches; ++b) {
      for (int k = 0; k < kBranchWidth; ++k) {
        REQUIRE(f.values[mesh_feature_index(v, b, k)] == 1 + v * 1000.0 + b * 100.0 + k);
      }
    }
  }
  CHECK(f.values.tail(kMeshFeatureLength - 10 * kVertexFeatures).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("long meshes are truncated in vertex order") {
  const auto f = assemble_mesh_features(tagged_branches(1200));
  CHECK(f.values.size() == kMeshFeatureLength);
  CHECK(f.vertex_count_actual == kSampledVertices);
  CHECK(f.values[mesh_feature_index(999, 2, 31)] == 1 + 999 * 1000.0 + 200.0 + 31);
  CHECK(f.values[mesh_feature_index(0, 1, 0)] == 1 + 100.0);
}

TEST_CASE("branch width and row mismatches") {
  auto wide = tagged_branches(4);
  wide[1].conservativeResize(4, 33);
  expect_code(ErrorCode::BranchWidthMismatch, [&] { assemble_mesh_features(wide); });
  auto uneven = tagged_branches(4);
  uneven[2].conservativeResize(5, kBranchWidth);
  expect_code(ErrorCode::BranchWidthMismatch, [&] { assemble_mesh_features(uneven); });
}

TEST_CASE("hybrid vector puts the encoder block first") {
  Eigen::VectorXd enc = Eigen::VectorXd::LinSpaced(kEncoderFeatureLength, -1.0, 1.0);
  const auto mesh = assemble_mesh_features(tagged_branches(3));
  const Eigen::VectorXd h = concat_hybrid(enc, mesh);
  CHECK(h.size() == kHybridFeatureLength);
  CHECK(h.head(kEncoderFeatureLength) == enc);
  CHECK(h[kEncoderFeatureLength + mesh_feature_index(2, 1, 5)] == mesh.values[mesh_feature_index(2, 1, 5)]);
  expect_code(ErrorCode::LengthMismatch, [&] { concat_hybrid(enc.head(100), mesh); });
}

TEST_CASE("geometric stand-in features") {
  TriMesh m = phantom::icosphere(2, 3.0);
  Eigen::VectorXd cls = Eigen::VectorXd::Zero(m.vertex_count());
  cls[4] = 1;
  cls[7] = 2;
  m.channels["class"] = cls;
  const auto br = geometric_branch_features(m);
  for (const auto& b : br) {
    CHECK(b.rows() == m.vertex_count());
    CHECK(b.cols() == kBranchWidth);
    CHECK(b == br[0]);
  }
  CHECK((br[0].leftCols(3) - m.vertices).cwiseAbs().maxCoeff() == 0.0);
  CHECK(br[0](4, 8) == 1.0);
  CHECK(br[0](7, 9) == 1.0);
  CHECK(br[0](0, 7) == 1.0);
  CHECK(br[0].rightCols(kBranchWidth - 12).cwiseAbs().maxCoeff() == 0.0);
  const auto f = assemble_mesh_features(br);
  CHECK(f.vertex_count_actual == m.vertex_count());
}

TEST_CASE("zero weights give an even split") {
  const MlpWeights w = zero_mlp({6, 4, 3, 2});
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(6, -2.0, 3.0);
  const Prediction p = mlp_forward(x, w);
  CHECK(p.p_malignant == 0.5);
  CHECK(p.p_benign == 0.5);
}

TEST_CASE("hand-computed forward pass") {
  // 2 -> 2 -> 2 -> 2 with values chosen so every step is easy to follow.
  MlpWeights w = zero_mlp({2, 2, 2, 2});
  w.layers[0].weight << 1, -1, 0.5, 2;
  w.layers[0].bias << 0, -1;
  w.layers[1].weight << 1, 0, -1, 1;
  w.layers[1].bias << 0.5, 0;
  w.layers[2].weight << 1, 0, 0, 1;
  w.layers[2].bias << 0, 0.25;
  const Eigen::Vector2d x(2.0, 1.0);
  // h1 = relu([2 - 1, 1 + 2 - 1]) = [1, 2]
  // h2 = relu([1 + 0.5, -1 + 2]) = [1.5, 1]
  // z  = [1.5, 1.25]
  const double z0 = 1.5, z1 = 1.25;
  const double p1 = std::exp(z1) / (std::exp(z0) + std::exp(z1));
  const Prediction p = mlp_forward(x, w);
  CHECK(std::abs(p.p_malignant - p1) < 1e-9);
  CHECK(std::abs(p.p_benign + p.p_malignant - 1.0) < 1e-12);
}

TEST_CASE("softmax properties on random networks") {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    MlpWeights w = random_mlp(rng, {8, 6, 4, 2});
    Eigen::VectorXd x(8);
    for (auto& v : x) v = g(rng);
    const Prediction p = mlp_forward(x, w);
    CHECK(std::abs(p.p_benign + p.p_malignant - 1.0) < 1e-12);
    CHECK(p.p_malignant >= 0.0);

    // A common shift of the output biases changes nothing. The shift is a
    // power of two so the float biases move without rounding.
    MlpWeights shifted = w;
    for (auto& b : shifted.layers.back().bias) b = std::ldexp(std::round(std::ldexp(b, 10)), -10);
    MlpWeights shifted_more = shifted;
    shifted_more.layers.back().bias.array() += 2.0f;
    CHECK(std::abs(mlp_forward(x, shifted_more).p_malignant - mlp_forward(x, shifted).p_malignant) < 1e-12);

    // Scaling the logits keeps the winning class.
    MlpWeights scaled = w;
    scaled.layers.back().weight *= 4.0f;
    scaled.layers.back().bias *= 4.0f;
    const Prediction q = mlp_forward(x, scaled);
    if (std::abs(p.p_malignant - 0.5) > 1e-6) CHECK((q.p_malignant > 0.5) == (p.p_malignant > 0.5));
  }
}

TEST_CASE("weight validation") {
  MlpWeights w = zero_mlp({4, 3, 2});
  expect_code(ErrorCode::DimMismatch, [&] { mlp_forward(Eigen::VectorXd::Zero(5), w); });
  MlpWeights broken = w;
  broken.layers[1].weight.resize(2, 4);
  broken.layers[1].weight.setZero();
  expect_code(ErrorCode::DimMismatch, [&] { broken.validate(); });
  expect_code(ErrorCode::DimMismatch, [&] { zero_mlp({4, 3}).validate(); });
  MlpWeights nan = w;
  nan.layers[0].weight(1, 1) = std::numeric_limits<float>::quiet_NaN();
  expect_code(ErrorCode::NonFiniteWeights, [&] { nan.validate(); });
}

TEST_CASE("CIRW round trip and corrupt files") {
  const auto dir = oracle::scratch("weights");
  std::mt19937_64 rng(8);
  const MlpWeights w = random_mlp(rng, {7, 5, 3, 2});
  save_weights(w, dir / "w.cirw");
  const MlpWeights r = load_weights(dir / "w.cirw");
  REQUIRE(r.layers.size() == w.layers.size());
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    CHECK(r.layers[i].weight == w.layers[i].weight);
    CHECK(r.layers[i].bias == w.layers[i].bias);
  }
  // 4 magic + 4 version + 4 count + per layer 8 header bytes and 4 per float.
  CHECK(std::filesystem::file_size(dir / "w.cirw") == 12 + 3 * 8 + 4 * (5 * 7 + 5 + 3 * 5 + 3 + 2 * 3 + 2));

  std::ifstream in(dir / "w.cirw", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::string magic = bytes;
  magic[0] = 'X';
  std::ofstream(dir / "magic.cirw", std::ios::binary) << magic;
  expect_code(ErrorCode::BadMagic, [&] { load_weights(dir / "magic.cirw"); });

  std::string version = bytes;
  version[4] = 2;
  std::ofstream(dir / "version.cirw", std::ios::binary) << version;
  expect_code(ErrorCode::VersionUnsupported, [&] { load_weights(dir / "version.cirw"); });

  std::ofstream(dir / "short.cirw", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  expect_code(ErrorCode::TruncatedFile, [&] { load_weights(dir / "short.cirw"); });

  expect_code(ErrorCode::IoError, [&] { load_weights(dir / "absent.cirw"); });
}

TEST_CASE("feature files") {
  const auto dir = oracle::scratch("features");
  Eigen::VectorXd v(4);
  v << 0.1, -2.5, 1e-30, 7.0;
  save_features(v, dir / "f.txt");
  CHECK(load_features(dir / "f.txt") == v);
  save_features(v, dir / "f.f32");
  const Eigen::VectorXd b = load_features(dir / "f.f32");
  CHECK(b == v.cast<float>().cast<double>());
  CHECK(std::filesystem::file_size(dir / "f.f32") == 16);
}
