#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "cir/mesh.hpp"

namespace cir {

inline constexpr int kSampledVertices = 1000;
inline constexpr int kBranchWidth = 32;
inline constexpr int kBranches = 3;  // nodule, spiculation, lobulation
inline constexpr int kVertexFeatures = kBranchWidth * kBranches;
inline constexpr int kMeshFeatureLength = kSampledVertices * kVertexFeatures;  // 96000
inline constexpr int kEncoderFeatureLength = 256 * 4 * 4 * 4;                   // 16384
inline constexpr int kHybridFeatureLength = kEncoderFeatureLength + kMeshFeatureLength;

/// Flat slot of feature k of branch b at sampled vertex v.
constexpr int mesh_feature_index(int v, int branch, int k) { return kVertexFeatures * v + kBranchWidth * branch + k; }

struct MeshFeatureVector {
  Eigen::VectorXd values;  // kMeshFeatureLength
  int vertex_count_actual = 0;
  std::string source = "deep";
};

/// Per-vertex features of one decoder branch, one row per vertex.
using BranchFeatures = Eigen::MatrixXd;

/// Packs the first min(V, 1000) vertices of three branches in mesh order,
/// zero-padding the rest.
///
/// Throws Error(BranchWidthMismatch) unless every branch has 32 columns and the
/// same row count.
MeshFeatureVector assemble_mesh_features(const std::array<BranchFeatures, kBranches>& branches);

/// Stand-in per-vertex features used when no trained decoder is available:
/// position, normal, epsilon, class one-hot, one-ring area and mean edge length,
/// zero-padded to 32 and repeated in every branch.
std::array<BranchFeatures, kBranches> geometric_branch_features(const TriMesh& mesh);

/// Encoder block first, mesh block second.
///
/// Throws Error(LengthMismatch) unless the encoder block has 16384 values.
Eigen::VectorXd concat_hybrid(const Eigen::VectorXd& encoder, const MeshFeatureVector& mesh);

struct DenseLayer {
  Eigen::MatrixXf weight;  // out x in
  Eigen::VectorXf bias;    // out
};

/// Fully connected classifier: ReLU, ReLU, softmax.
struct MlpWeights {
  std::vector<DenseLayer> layers;

  /// Input width followed by every layer's output width.
  std::vector<int> dims() const;
  /// Throws Error(DimMismatch) or Error(NonFiniteWeights).
  void validate() const;
};

/// Zero weights with the given widths, e.g. {96000, 512, 128, 2}.
MlpWeights zero_mlp(const std::vector<int>& dims);

inline const std::vector<int> kMeshOnlyDims{kMeshFeatureLength, 512, 128, 2};
inline const std::vector<int> kHybridDims{kHybridFeatureLength, 512, 128, 2};

struct Prediction {
  double p_benign = 0.5;
  double p_malignant = 0.5;
};

/// Forward pass in double precision over float parameters.
///
/// Throws Error(DimMismatch) when `x` does not match the input width.
Prediction mlp_forward(const Eigen::VectorXd& x, const MlpWeights& weights);

/// Binary "CIRW" format, little-endian: magic, u32 version (1), u32 layer
/// count, then per layer u32 rows, u32 cols, rows*cols f32 row-major, rows f32 bias.
void save_weights(const MlpWeights& weights, const std::filesystem::path& path);
/// Throws Error(BadMagic), Error(VersionUnsupported), Error(TruncatedFile) or Error(IoError).
MlpWeights load_weights(const std::filesystem::path& path);

/// Feature file: raw little-endian f32 for ".f32"/".bin", whitespace-separated text otherwise.
Eigen::VectorXd load_features(const std::filesystem::path& path);
void save_features(const Eigen::VectorXd& values, const std::filesystem::path& path);

}  // namespace cir
