#include "cir/malignancy.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "cir/error.hpp"

static_assert(std::endian::native == std::endian::little, "weight I/O assumes a little-endian host");

namespace cir {

MeshFeatureVector assemble_mesh_features(const std::array<BranchFeatures, kBranches>& branches) {
  const Eigen::Index rows = branches[0].rows();
  for (int b = 0; b < kBranches; ++b) {
    if (branches[b].cols() != kBranchWidth) {
      throw Error(ErrorCode::BranchWidthMismatch,
                  "branch " + std::to_string(b) + " has " + std::to_string(branches[b].cols()) + " features per vertex");
    }
    if (branches[b].rows() != rows) throw Error(ErrorCode::BranchWidthMismatch, "branches differ in vertex count");
  }
  MeshFeatureVector out;
  out.values = Eigen::VectorXd::Zero(kMeshFeatureLength);
  out.vertex_count_actual = static_cast<int>(std::min<Eigen::Index>(rows, kSampledVertices));
  for (int v = 0; v < out.vertex_count_actual; ++v) {
    for (int b = 0; b < kBranches; ++b) {
      out.values.segment(mesh_feature_index(v, b, 0), kBranchWidth) = branches[b].row(v).transpose();
    }
  }
  return out;
}

std::array<BranchFeatures, kBranches> geometric_branch_features(const TriMesh& mesh) {
  const int nv = mesh.vertex_count();
  const auto topo = build_topology(mesh);
  const Vertices normals = vertex_normals(mesh, topo);
  const Eigen::VectorXd ring = one_ring_areas(mesh, topo);
  const auto eps_it = mesh.channels.find("epsilon");
  const auto cls_it = mesh.channels.find("class");

  BranchFeatures f = BranchFeatures::Zero(nv, kBranchWidth);
  for (int v = 0; v < nv; ++v) {
    f.block<1, 3>(v, 0) = mesh.vertices.row(v);
    f.block<1, 3>(v, 3) = normals.row(v);
    f(v, 6) = eps_it != mesh.channels.end() ? eps_it->second[v] : 0.0;
    const int cls = cls_it != mesh.channels.end() ? static_cast<int>(cls_it->second[v]) : 0;
    if (cls >= 0 && cls < 3) f(v, 7 + cls) = 1.0;
    f(v, 10) = ring[v];
    double len = 0.0;
    for (int u : topo.neighbors[v]) len += (mesh.vertex(u) - mesh.vertex(v)).norm();
    f(v, 11) = topo.neighbors[v].empty() ? 0.0 : len / static_cast<double>(topo.neighbors[v].size());
  }
  return {f, f, f};
}

Eigen::VectorXd concat_hybrid(const Eigen::VectorXd& encoder, const MeshFeatureVector& mesh) {
  if (encoder.size() != kEncoderFeatureLength) {
    throw Error(ErrorCode::LengthMismatch, "encoder block has " + std::to_string(encoder.size()) + " values");
  }
  if (mesh.values.size() != kMeshFeatureLength) {
    throw Error(ErrorCode::LengthMismatch, "mesh block has " + std::to_string(mesh.values.size()) + " values");
  }
  Eigen::VectorXd out(kHybridFeatureLength);
  out << encoder, mesh.values;
  return out;
}

std::vector<int> MlpWeights::dims() const {
  std::vector<int> d;
  if (layers.empty()) return d;
  d.push_back(static_cast<int>(layers.front().weight.cols()));
  for (const auto& l : layers) d.push_back(static_cast<int>(l.weight.rows()));
  return d;
}

void MlpWeights::validate() const {
  if (layers.empty()) throw Error(ErrorCode::DimMismatch, "classifier has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.bias.size() != l.weight.rows()) throw Error(ErrorCode::DimMismatch, "bias width differs from layer width");
    if (i > 0 && l.weight.cols() != layers[i - 1].weight.rows()) {
      throw Error(ErrorCode::DimMismatch, "layer " + std::to_string(i) + " input width does not chain");
    }
    if (!l.weight.allFinite() || !l.bias.allFinite()) {
      throw Error(ErrorCode::NonFiniteWeights, "layer " + std::to_string(i) + " has non-finite parameters");
    }
  }
  if (layers.back().weight.rows() != 2) throw Error(ErrorCode::DimMismatch, "output layer must have width 2");
}

MlpWeights zero_mlp(const std::vector<int>& dims) {
  MlpWeights w;
  for (std::size_t i = 1; i < dims.size(); ++i) {
    w.layers.push_back({Eigen::MatrixXf::Zero(dims[i], dims[i - 1]), Eigen::VectorXf::Zero(dims[i])});
  }
  return w;
}

Prediction mlp_forward(const Eigen::VectorXd& x, const MlpWeights& weights) {
  weights.validate();
  if (x.size() != weights.layers.front().weight.cols()) {
    throw Error(ErrorCode::DimMismatch, "feature length " + std::to_string(x.size()) + " does not match input width " +
                                            std::to_string(weights.layers.front().weight.cols()));
  }
  Eigen::VectorXd h = x;
  for (std::size_t i = 0; i < weights.layers.size(); ++i) {
    const auto& l = weights.layers[i];
    Eigen::VectorXd z = l.weight.cast<double>() * h + l.bias.cast<double>();
    if (i + 1 < weights.layers.size()) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  const double m = h.maxCoeff();
  const Eigen::ArrayXd e = (h.array() - m).exp();
  const double sum = e.sum();
  return {e[0] / sum, e[1] / sum};
}

namespace {

constexpr char kMagic[4] = {'C', 'I', 'R', 'W'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  void take(void* dst, std::size_t n) {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::TruncatedFile, "weight file ends early");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    take(&v, sizeof v);
    return v;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void save_weights(const MlpWeights& weights, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(weights.layers.size()));
  for (const auto& l : weights.layers) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.weight.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.weight.cols()));
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = l.weight;
    out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(float)));
    out.write(reinterpret_cast<const char*>(l.bias.data()), static_cast<std::streamsize>(l.bias.size() * sizeof(float)));
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

MlpWeights load_weights(const std::filesystem::path& path) {
  Reader r(slurp(path));
  char magic[4];
  r.take(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorCode::BadMagic, "not a CIRW weight file");
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw Error(ErrorCode::VersionUnsupported, "weight file version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  MlpWeights w;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    const std::uint64_t need = (static_cast<std::uint64_t>(rows) * cols + rows) * sizeof(float);
    if (need > r.remaining()) throw Error(ErrorCode::TruncatedFile, "weight file ends early");
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    r.take(rm.data(), static_cast<std::size_t>(rm.size()) * sizeof(float));
    DenseLayer l{rm, Eigen::VectorXf(rows)};
    r.take(l.bias.data(), rows * sizeof(float));
    w.layers.push_back(std::move(l));
  }
  return w;
}

namespace {

bool is_binary_feature_file(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return ext == ".f32" || ext == ".bin";
}

}  // namespace

Eigen::VectorXd load_features(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  if (is_binary_feature_file(path)) {
    if (bytes.size() % sizeof(float) != 0) throw Error(ErrorCode::TruncatedFile, "feature file size is not 4-aligned");
    Eigen::VectorXf f(static_cast<Eigen::Index>(bytes.size() / sizeof(float)));
    std::memcpy(f.data(), bytes.data(), bytes.size());
    return f.cast<double>();
  }
  std::istringstream in(bytes);
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size()) throw Error(ErrorCode::MalformedFile, "bad feature value: " + token);
    values.push_back(v);
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void save_features(const Eigen::VectorXd& values, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  if (is_binary_feature_file(path)) {
    const Eigen::VectorXf f = values.cast<float>();
    out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(float)));
  } else {
    char buf[32];
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g\n", values[i]);
      out << buf;
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

}  // namespace cir
