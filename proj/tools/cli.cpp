#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "cir/config.hpp"
#include "cir/error.hpp"
#include "cir/malignancy.hpp"
#include "cir/metrics.hpp"
#include "cir/pipeline.hpp"

namespace cir::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotGenusZero:
    case ErrorCode::NonManifold:
    case ErrorCode::NoBijectiveMap:
    case ErrorCode::NonManifoldOutput:
    case ErrorCode::GridTooCoarse:
    case ErrorCode::ConnectivityMismatch:
    case ErrorCode::OpenSurface:
      return kExitPipeline;
    default:
      return kExitInput;
  }
}

// Runs `body`, mapping exceptions to exit codes and messages on `err`.
template <typename Body>
int guarded(std::ostream& err, const std::string& context, Body&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "cir: " << context << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "cir: " << context << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

void emit(const json& doc, const std::string& out_path, std::ostream& out) {
  const std::string text = doc.dump(2) + "\n";
  if (out_path.empty() || out_path == "-") out << text;
  else write_text(out_path, text);
}

// ---- annotate -------------------------------------------------------------

struct AnnotateArgs {
  std::vector<std::string> masks;
  std::string out_dir;
  std::string config_path;
  std::vector<std::string> sets;
  int jobs = 1;
  bool energy_log = false;
};

int annotate_one(const fs::path& mask, const fs::path& out_dir, const PipelineConfig& config, bool energy_log,
                 std::ostream& err) {
  return guarded(err, mask.string() + ": ", [&] {
    if (!fs::exists(mask)) throw Error(ErrorCode::IoError, "no such file");
    const MaskVolume vol = read_nrrd(mask);
    const AnnotateResult result = annotate_volume(vol, config);
    write_annotate_outputs(result, config, out_dir);
    if (energy_log) write_energy_log(result.map, out_dir / "energy.txt");
    return kExitOk;
  });
}

int run_annotate(const AnnotateArgs& a, std::ostream& err) {
  PipelineConfig config;
  const int cfg_status = guarded(err, "config: ", [&] {
    if (!a.config_path.empty()) config = load_config(a.config_path);
    for (const auto& s : a.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "--set expects key=value, got '" + s + "'");
      config.set(s.substr(0, eq), s.substr(eq + 1));
    }
    config.validate();
    if (a.jobs < 1) throw Error(ErrorCode::InvalidConfig, "--jobs must be >= 1");
    return kExitOk;
  });
  if (cfg_status != kExitOk) return cfg_status;

  // One case writes straight into out_dir; several get one subdirectory each.
  const std::size_t n = a.masks.size();
  std::vector<fs::path> targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    targets[i] = n == 1 ? fs::path(a.out_dir) : fs::path(a.out_dir) / fs::path(a.masks[i]).stem().stem();
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (targets[i] == targets[j]) {
        err << "cir: masks " << a.masks[j] << " and " << a.masks[i] << " map to the same output directory\n";
        return kExitInput;
      }
    }
  }

  std::vector<int> status(n, kExitOk);
  std::vector<std::string> messages(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      std::ostringstream case_err;
      status[i] = annotate_one(a.masks[i], targets[i], config, a.energy_log, case_err);
      messages[i] = case_err.str();
    }
  };
  const int threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(a.jobs), n));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& m : messages) err << m;
  return *std::max_element(status.begin(), status.end());
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> pred_masks, gt_masks, pred_meshes, gt_meshes;
  std::string scores;
  bool rating_labels = false;
  double threshold = 0.5;
  std::string out;
};

TriMesh read_mesh(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::IoError, "no such file: " + path.string());
  return path.extension() == ".obj" ? read_obj(path) : read_ply(path);
}

Vertices class_vertices(const TriMesh& mesh, int cls) {
  if (cls < 0) return mesh.vertices;
  const auto it = mesh.channels.find("class");
  std::vector<int> keep;
  if (it != mesh.channels.end()) {
    for (int v = 0; v < mesh.vertex_count(); ++v) {
      if (static_cast<int>(it->second[v]) == cls) keep.push_back(v);
    }
  }
  Vertices out(static_cast<Eigen::Index>(keep.size()), 3);
  for (std::size_t i = 0; i < keep.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = mesh.vertices.row(keep[i]);
  return out;
}

const std::array<const char*, 3> kClassNames{"nodule", "spiculation", "lobulation"};

json mean_of(const std::vector<json>& rows, const char* metric) {
  json out = json::object();
  for (const char* name : kClassNames) {
    double sum = 0.0;
    int count = 0;
    for (const auto& r : rows) {
      const auto& v = r[metric][name];
      if (v.is_number()) {
        sum += v.get<double>();
        ++count;
      }
    }
    out[name] = count > 0 ? json(sum / count) : json(nullptr);
  }
  return out;
}

BinaryOutcomes read_scores(const fs::path& path, bool rating_labels, double threshold) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<double> scores, labels;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    double s = 0.0, l = 0.0;
    if (!(ls >> s >> l)) throw Error(ErrorCode::MalformedFile, "expected 'score label' in " + path.string());
    scores.push_back(s);
    labels.push_back(l);
  }
  BinaryOutcomes o;
  o.threshold = threshold;
  o.scores = Eigen::Map<Eigen::VectorXd>(scores.data(), static_cast<Eigen::Index>(scores.size()));
  o.labels.resize(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    o.labels[static_cast<Eigen::Index>(i)] = rating_labels ? binarize_rating(labels[i]) : (labels[i] != 0.0 ? 1 : 0);
  }
  return o;
}

int run_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  return guarded(err, "eval: ", [&] {
    if (a.pred_masks.size() != a.gt_masks.size()) {
      throw Error(ErrorCode::LengthMismatch, "different numbers of predicted and reference masks");
    }
    if (a.pred_meshes.size() != a.gt_meshes.size()) {
      throw Error(ErrorCode::LengthMismatch, "different numbers of predicted and reference meshes");
    }
    if (a.pred_masks.empty() && a.pred_meshes.empty() && a.scores.empty()) {
      throw Error(ErrorCode::InvalidConfig, "nothing to evaluate");
    }
    std::vector<json> jaccard_rows, chamfer_rows;
    json cases_masks = json::array();
    for (std::size_t i = 0; i < a.pred_masks.size(); ++i) {
      const MaskVolume p = read_nrrd(a.pred_masks[i]);
      const MaskVolume g = read_nrrd(a.gt_masks[i]);
      json row = {{"pred", a.pred_masks[i]},
                  {"reference", a.gt_masks[i]},
                  {"jaccard",
                   {{"nodule", jaccard_foreground(p, g)},
                    {"spiculation", jaccard(p, g, label::kSpiculation)},
                    {"lobulation", jaccard(p, g, label::kLobulation)}}}};
      jaccard_rows.push_back(row);
      cases_masks.push_back(row);
    }
    json cases_meshes = json::array();
    for (std::size_t i = 0; i < a.pred_meshes.size(); ++i) {
      const TriMesh p = read_mesh(a.pred_meshes[i]);
      const TriMesh g = read_mesh(a.gt_meshes[i]);
      json ch = json::object();
      for (int c = 0; c < 3; ++c) {
        const Vertices pa = class_vertices(p, c == 0 ? -1 : c);
        const Vertices ga = class_vertices(g, c == 0 ? -1 : c);
        ch[kClassNames[c]] =
            (pa.rows() == 0 || ga.rows() == 0) ? json(nullptr) : json(chamfer_weighted_symmetric(pa, ga));
      }
      json row = {{"pred", a.pred_meshes[i]}, {"reference", a.gt_meshes[i]}, {"chamfer", ch}};
      chamfer_rows.push_back(row);
      cases_meshes.push_back(row);
    }

    json doc = json::object();
    if (!jaccard_rows.empty()) doc["masks"] = {{"cases", cases_masks}, {"mean_jaccard", mean_of(jaccard_rows, "jaccard")}};
    if (!chamfer_rows.empty()) {
      doc["meshes"] = {{"cases", cases_meshes}, {"mean_chamfer", mean_of(chamfer_rows, "chamfer")}};
    }
    if (!a.scores.empty()) {
      const BinaryOutcomes o = read_scores(a.scores, a.rating_labels, a.threshold);
      const BinaryMetrics m = binary_metrics(o);
      doc["classification"] = {{"cases", o.scores.size()}, {"threshold", o.threshold}, {"auc", roc_auc(o)},
                               {"accuracy", m.accuracy},   {"sensitivity", m.sensitivity},
                               {"specificity", m.specificity}, {"f1", m.f1},
                               {"confusion", {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}}}};
    }
    doc["definitions"] = {
        {"chamfer", "mean squared nearest-neighbor distance, summed over both directions"},
        {"jaccard", "nodule = any nonzero label; spiculation = label 2; lobulation = label 3"},
        {"threshold", "score >= threshold is positive"}};
    emit(doc, a.out, out);
    return kExitOk;
  });
}

// ---- predict --------------------------------------------------------------

struct PredictArgs {
  std::string features, weights, mesh, encoder;
  double threshold = 0.5;
  std::string source = "deep";
};

int run_predict(const PredictArgs& a, std::ostream& out, std::ostream& err) {
  return guarded(err, "predict: ", [&] {
    if (a.weights.empty() || !fs::exists(a.weights)) throw Error(ErrorCode::IoError, "missing weights file");
    if (a.features.empty() == a.mesh.empty()) throw Error(ErrorCode::InvalidConfig, "give exactly one of --features or --mesh");
    if (!(a.threshold >= 0.0 && a.threshold <= 1.0)) throw Error(ErrorCode::InvalidConfig, "threshold must be in [0, 1]");
    Eigen::VectorXd x;
    std::string source = a.source;
    if (!a.features.empty()) {
      if (!fs::exists(a.features)) throw Error(ErrorCode::IoError, "no such file: " + a.features);
      x = load_features(a.features);
    } else {
      const MeshFeatureVector mf = assemble_mesh_features(geometric_branch_features(read_mesh(a.mesh)));
      x = a.encoder.empty() ? mf.values : concat_hybrid(load_features(a.encoder), mf);
      source = "geometric-standin";
    }
    const MlpWeights w = load_weights(a.weights);
    const Prediction p = mlp_forward(x, w);
    json doc = {{"p_malignant", p.p_malignant},
                {"p_benign", p.p_benign},
                {"threshold", a.threshold},
                {"label", p.p_malignant >= a.threshold ? "malignant" : "benign"},
                {"feature_source", source},
                {"input_dim", x.size()}};
    out << doc.dump(2) << "\n";
    return kExitOk;
  });
}

// ---- info -----------------------------------------------------------------

int run_info(const std::string& path, std::ostream& out, std::ostream& err) {
  return guarded(err, path + ": ", [&] {
    if (!fs::exists(path)) throw Error(ErrorCode::IoError, "no such file");
    const std::string ext = fs::path(path).extension().string();
    json doc;
    if (ext == ".nrrd" || ext == ".nhdr") {
      const MaskVolume v = read_nrrd(path);
      json counts = json::object();
      for (int l = 0; l < 256; ++l) {
        const std::size_t c = v.count_label(static_cast<std::uint8_t>(l));
        if (c > 0) counts[std::to_string(l)] = c;
      }
      doc = {{"kind", "volume"},
             {"dims", v.dims},
             {"spacing", {v.spacing[0], v.spacing[1], v.spacing[2]}},
             {"origin", {v.origin[0], v.origin[1], v.origin[2]}},
             {"label_counts", counts},
             {"foreground_volume_mm3", static_cast<double>(v.count_foreground()) * v.spacing.prod()}};
    } else {
      const TriMesh m = read_mesh(path);
      validate_mesh(m);
      const auto topo = build_topology(m);
      doc = {{"kind", "mesh"}, {"vertices", m.vertex_count()}, {"faces", m.face_count()},
             {"edges", topo.edge_count()}, {"closed", topo.closed}, {"surface_area", surface_area(m)}};
      if (topo.closed) {
        const MeshStats s = mesh_stats(m);
        doc["euler"] = s.euler;
        doc["genus"] = s.genus;
        doc["volume"] = s.volume;
      }
      json channels = json::array();
      for (const auto& [name, values] : m.channels) channels.push_back(name);
      doc["channels"] = channels;
    }
    out << doc.dump(2) << "\n";
    return kExitOk;
  });
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spiculation and lobulation annotation of nodule masks"};
  app.require_subcommand(1);

  AnnotateArgs an;
  auto* annotate = app.add_subcommand("annotate", "Annotate one or more NRRD masks");
  annotate->add_option("masks", an.masks, "Input mask files")->required();
  annotate->add_option("-o,--out", an.out_dir, "Output directory")->required();
  annotate->add_option("-c,--config", an.config_path, "key=value config file");
  annotate->add_option("--set", an.sets, "Config override key=value (repeatable, wins over the file)");
  annotate->add_option("-j,--jobs", an.jobs, "Cases processed in parallel");
  annotate->add_flag("--energy-log", an.energy_log, "Also write the per-sweep energy to energy.txt");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Jaccard, chamfer and classification metrics");
  eval->add_option("--pred-mask", ev.pred_masks, "Predicted label volumes");
  eval->add_option("--gt-mask", ev.gt_masks, "Reference label volumes, same order");
  eval->add_option("--pred-mesh", ev.pred_meshes, "Predicted meshes (PLY with class channel, or OBJ)");
  eval->add_option("--gt-mesh", ev.gt_meshes, "Reference meshes, same order");
  eval->add_option("--scores", ev.scores, "Text file of 'score label' lines");
  eval->add_flag("--rating-labels", ev.rating_labels, "Labels are 1-5 ratings; positive above 3");
  eval->add_option("--threshold", ev.threshold, "Decision threshold");
  eval->add_option("-o,--out", ev.out, "Report path (default: standard output)");

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Malignancy classifier forward pass");
  predict->add_option("--features", pr.features, "Feature vector (.f32/.bin raw float32, else text)");
  predict->add_option("--mesh", pr.mesh, "Annotated mesh; uses the geometric stand-in features");
  predict->add_option("--encoder", pr.encoder, "Encoder features to prepend (hybrid input, with --mesh)");
  predict->add_option("-w,--weights", pr.weights, "CIRW weight file")->required();
  predict->add_option("--threshold", pr.threshold, "Decision threshold");
  predict->add_option("--feature-source", pr.source, "Recorded feature provenance")
      ->check(CLI::IsMember({"deep", "geometric-standin"}));

  std::string info_path;
  auto* info = app.add_subcommand("info", "Print volume or mesh statistics");
  info->add_option("path", info_path, "NRRD, PLY or OBJ file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "cir: " << e.what() << "\n";
    return kExitInput;
  }

  if (*annotate) return run_annotate(an, err);
  if (*eval) return run_eval(ev, out, err);
  if (*predict) return run_predict(pr, out, err);
  if (*info) return run_info(info_path, out, err);
  return kExitInput;
}

}  // namespace cir::cli
