#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cir/mesh.hpp"
#include "cir/volume.hpp"

namespace cir {

/// Mean squared nearest-neighbor distance from A to B plus the same from B to A.
///
/// Throws Error(EmptySet) when either set has no points.
double chamfer_weighted_symmetric(const Vertices& a, const Vertices& b);

/// Intersection over union of {a == class_id} and {b == class_id}; 1 when both are empty.
///
/// Throws Error(DimMismatch) when the grids differ in size.
double jaccard(const MaskVolume& a, const MaskVolume& b, std::uint8_t class_id);

/// Same, over the foreground (label != 0).
double jaccard_foreground(const MaskVolume& a, const MaskVolume& b);

/// Mean over vertices of |v - mean(one-ring)|^2.
double laplacian_loss(const TriMesh& mesh);
/// Mean over edges of |e|^2.
double edge_loss(const TriMesh& mesh);
/// Mean over interior edges of 1 - cos(angle between adjacent face normals).
double normal_consistency_loss(const TriMesh& mesh);

inline constexpr double kProbabilityClamp = 1e-7;

/// Mean of -log p[i, label[i]] with probabilities clamped to [1e-7, 1 - 1e-7].
///
/// Throws Error(ShapeMismatch) when rows and labels disagree or a label is out of range.
double cross_entropy(const Eigen::MatrixXd& probs, const Eigen::VectorXi& labels);
double bce(double p, int y);
/// Mean binary cross entropy over cases.
double bce(const Eigen::VectorXd& p, const Eigen::VectorXi& y);

struct LossWeights {
  double w_bce = 1.0;
  double w_ce = 1.0;
  double w_chamfer_nodule = 1.0;
  double w_chamfer_spic = 1.0;
  double w_chamfer_lob = 1.0;
  double w_laplacian = 0.1;
  double w_edge = 1.0;
  double w_normal = 0.1;
};

/// Component names accepted by total_loss.
const std::vector<std::string>& loss_component_names();

/// Weighted sum of the named components. The mesh regularizers are summed as a
/// group before being added to the data terms.
///
/// Throws Error(MissingComponent) when a component is absent or non-finite.
double total_loss(const std::map<std::string, double>& components, const LossWeights& weights = {});

struct BinaryOutcomes {
  Eigen::VectorXd scores;
  Eigen::VectorXi labels;
  double threshold = 0.5;
};

/// Mann-Whitney statistic with tied pairs counted as one half.
///
/// Throws Error(DegenerateLabels) when only one class is present and
/// Error(LengthMismatch) when sizes differ.
double roc_auc(const BinaryOutcomes& o);

struct BinaryMetrics {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;
};

/// Confusion-matrix metrics with "score >= threshold" as positive. Ratios with
/// a zero denominator are reported as 0.
BinaryMetrics binary_metrics(const BinaryOutcomes& o);

/// Radiologist malignancy ratings (1..5) are positive above 3.
inline int binarize_rating(double rating) { return rating > 3.0 ? 1 : 0; }

}  // namespace cir
