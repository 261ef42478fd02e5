#include "cir/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cir/error.hpp"
#include "cir/point_grid.hpp"

namespace cir {

namespace {

double directed_mean(const Vertices& from, const PointGrid<double>& to) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < from.rows(); ++i) sum += to.nearest(from.row(i).transpose()).squared_distance;
  return sum / static_cast<double>(from.rows());
}

double clamp_probability(double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); }

}  // namespace

double chamfer_weighted_symmetric(const Vertices& a, const Vertices& b) {
  if (a.rows() == 0 || b.rows() == 0) throw Error(ErrorCode::EmptySet, "chamfer distance of an empty point set");
  const PointGrid<double> ga(a), gb(b);
  return directed_mean(a, gb) + directed_mean(b, ga);
}

namespace {

template <typename Pred>
double jaccard_by(const MaskVolume& a, const MaskVolume& b, Pred in) {
  if (a.dims != b.dims || a.labels.size() != b.labels.size()) {
    throw Error(ErrorCode::DimMismatch, "label volumes differ in size");
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const bool x = in(a.labels[i]);
    const bool y = in(b.labels[i]);
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

double jaccard(const MaskVolume& a, const MaskVolume& b, std::uint8_t class_id) {
  return jaccard_by(a, b, [class_id](std::uint8_t l) { return l == class_id; });
}

double jaccard_foreground(const MaskVolume& a, const MaskVolume& b) {
  return jaccard_by(a, b, [](std::uint8_t l) { return l != 0; });
}

double laplacian_loss(const TriMesh& mesh) {
  if (mesh.vertex_count() == 0) return 0.0;
  const auto topo = build_topology(mesh);
  double sum = 0.0;
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    const auto& ring = topo.neighbors[v];
    if (ring.empty()) continue;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (int u : ring) mean += mesh.vertex(u);
    mean /= static_cast<double>(ring.size());
    sum += (mesh.vertex(v) - mean).squaredNorm();
  }
  return sum / mesh.vertex_count();
}

double edge_loss(const TriMesh& mesh) {
  const auto topo = build_topology(mesh);
  if (topo.edge_count() == 0) return 0.0;
  double sum = 0.0;
  for (int e = 0; e < topo.edge_count(); ++e) {
    sum += (mesh.vertex(topo.edges(e, 0)) - mesh.vertex(topo.edges(e, 1))).squaredNorm();
  }
  return sum / topo.edge_count();
}

double normal_consistency_loss(const TriMesh& mesh) {
  const auto topo = build_topology(mesh);
  auto normal = [&](int f) {
    const Eigen::Vector3d a = mesh.vertex(mesh.faces(f, 0));
    const Eigen::Vector3d n = (mesh.vertex(mesh.faces(f, 1)) - a).cross(mesh.vertex(mesh.faces(f, 2)) - a);
    const double len = n.norm();
    return len > 0.0 ? Eigen::Vector3d(n / len) : Eigen::Vector3d::Zero();
  };
  double sum = 0.0;
  int interior = 0;
  for (int e = 0; e < topo.edge_count(); ++e) {
    if (topo.edge_faces(e, 0) < 0 || topo.edge_faces(e, 1) < 0) continue;
    sum += 1.0 - normal(topo.edge_faces(e, 0)).dot(normal(topo.edge_faces(e, 1)));
    ++interior;
  }
  return interior == 0 ? 0.0 : sum / interior;
}

double cross_entropy(const Eigen::MatrixXd& probs, const Eigen::VectorXi& labels) {
  if (probs.rows() != labels.size() || probs.rows() == 0) {
    throw Error(ErrorCode::ShapeMismatch, "probabilities and labels differ in length");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    if (labels[i] < 0 || labels[i] >= probs.cols()) throw Error(ErrorCode::ShapeMismatch, "label out of range");
    sum -= std::log(clamp_probability(probs(i, labels[i])));
  }
  return sum / static_cast<double>(probs.rows());
}

double bce(double p, int y) {
  const double q = clamp_probability(p);
  return y != 0 ? -std::log(q) : -std::log(1.0 - q);
}

double bce(const Eigen::VectorXd& p, const Eigen::VectorXi& y) {
  if (p.size() != y.size() || p.size() == 0) throw Error(ErrorCode::ShapeMismatch, "predictions and labels differ");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) sum += bce(p[i], y[i]);
  return sum / static_cast<double>(p.size());
}

const std::vector<std::string>& loss_component_names() {
  static const std::vector<std::string> names{"bce",           "ce",        "chamfer_nodule", "chamfer_spic",
                                              "chamfer_lob",   "laplacian", "edge",           "normal_consistency"};
  return names;
}

double total_loss(const std::map<std::string, double>& components, const LossWeights& w) {
  auto get = [&](const std::string& name) {
    const auto it = components.find(name);
    if (it == components.end()) throw Error(ErrorCode::MissingComponent, "missing loss component: " + name);
    if (!std::isfinite(it->second)) throw Error(ErrorCode::MissingComponent, "non-finite loss component: " + name);
    return it->second;
  };
  const double data = w.w_bce * get("bce") + w.w_ce * get("ce") + w.w_chamfer_nodule * get("chamfer_nodule") +
                      w.w_chamfer_spic * get("chamfer_spic") + w.w_chamfer_lob * get("chamfer_lob");
  const double regularizers =
      w.w_laplacian * get("laplacian") + w.w_edge * get("edge") + w.w_normal * get("normal_consistency");
  return data + regularizers;
}

double roc_auc(const BinaryOutcomes& o) {
  if (o.scores.size() != o.labels.size()) throw Error(ErrorCode::LengthMismatch, "scores and labels differ");
  const Eigen::Index n = o.scores.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return o.scores[a] < o.scores[b]; });

  // Sum over positives of (negatives strictly below + half the tied negatives).
  long negatives_below = 0, positives = 0, negatives = 0;
  double twice_wins = 0.0;
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    long pos = 0, neg = 0;
    while (j < n && o.scores[order[j]] == o.scores[order[i]]) {
      (o.labels[order[j]] != 0 ? pos : neg)++;
      ++j;
    }
    twice_wins += static_cast<double>(pos) * (2.0 * negatives_below + neg);
    negatives_below += neg;
    positives += pos;
    negatives += neg;
    i = j;
  }
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorCode::DegenerateLabels, "AUC needs at least one positive and one negative case");
  }
  return twice_wins / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

BinaryMetrics binary_metrics(const BinaryOutcomes& o) {
  if (o.scores.size() != o.labels.size()) throw Error(ErrorCode::LengthMismatch, "scores and labels differ");
  BinaryMetrics m;
  for (Eigen::Index i = 0; i < o.scores.size(); ++i) {
    const bool predicted = o.scores[i] >= o.threshold;
    const bool actual = o.labels[i] != 0;
    if (predicted && actual) ++m.tp;
    else if (predicted) ++m.fp;
    else if (actual) ++m.fn;
    else ++m.tn;
  }
  auto ratio = [](long num, long den) { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); };
  m.accuracy = ratio(m.tp + m.tn, m.tp + m.tn + m.fp + m.fn);
  m.sensitivity = ratio(m.tp, m.tp + m.fn);
  m.specificity = ratio(m.tn, m.tn + m.fp);
  m.f1 = ratio(2 * m.tp, 2 * m.tp + m.fp + m.fn);
  return m;
}

}  // namespace cir
