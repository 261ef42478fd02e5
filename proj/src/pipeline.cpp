#include "cir/pipeline.hpp"

#include <fstream>

#include <json.hpp>

#include "cir/error.hpp"
#include "cir/marching_cubes.hpp"

namespace cir {

SpikeOptions spike_options(const PipelineConfig& config) {
  SpikeOptions o;
  o.noise_floor = config.noise_floor;
  o.min_vertices = config.min_vertices;
  o.theta_spic_deg = config.theta_spic_deg;
  o.min_height_mm = config.min_height_mm;
  return o;
}

AnnotateResult annotate_volume(const MaskVolume& mask, const PipelineConfig& config) {
  config.validate();
  AnnotateResult r;
  r.grid = resample_isotropic(mask, config.target_spacing);
  r.mesh = largest_component(marching_cubes(r.grid));
  if (config.smooth_iterations > 0) r.mesh = taubin_smooth(r.mesh, config.smooth_iterations);

  ParamOptions po;
  po.max_iters = config.param_max_iters;
  po.tol = config.param_tol;
  r.map = parameterize(r.mesh, po);
  r.distortion = area_distortion(r.mesh, r.map);
  r.annotation = annotate(r.mesh, r.distortion, spike_options(config));
  r.mesh.channels["epsilon"] = r.distortion.epsilon_vertex;
  r.mesh.channels["class"] = r.annotation.vertex_class.cast<double>();
  r.masks = voxelize_annotation(r.annotation, r.mesh, r.grid);
  return r;
}

std::string annotation_json(const AnnotateResult& r, const PipelineConfig& config) {
  using nlohmann::json;
  json cfg = json::object();
  for (const auto& [k, v] : config.entries()) cfg[k] = v;

  json spikes = json::array();
  for (const auto& s : r.annotation.spikes) {
    spikes.push_back({{"apex_id", s.apex_id},
                      {"vertex_count", s.vertex_ids.size()},
                      {"height_mm", s.height_mm},
                      {"base_radius_mm", s.base_radius_mm},
                      {"apex_angle_deg", s.apex_angle_deg},
                      {"mean_epsilon", s.mean_epsilon},
                      {"apex_epsilon", r.distortion.epsilon_vertex[s.apex_id]},
                      {"class", std::string(to_string(s.cls))}});
  }
  const auto& sm = r.annotation.summary;
  json summary = {{"n_spiculations", sm.n_spiculations},
                  {"n_lobulations", sm.n_lobulations},
                  {"spiculation_area_fraction", sm.spiculation_area_fraction},
                  {"lobulation_area_fraction", sm.lobulation_area_fraction},
                  {"base_area_fraction", sm.base_area_fraction},
                  {"min_epsilon", sm.min_epsilon},
                  {"mean_apex_angle_spiculation_deg", nullptr}};
  if (sm.mean_apex_angle_spiculation_deg) summary["mean_apex_angle_spiculation_deg"] = *sm.mean_apex_angle_spiculation_deg;

  const SpikeOptions so = spike_options(config);
  json doc = {{"config", cfg},
              {"params",
               {{"noise_floor", so.noise_floor},
                {"theta_spic_deg", so.theta_spic_deg},
                {"min_height_mm", so.min_height_mm},
                {"min_vertices", so.min_vertices}}},
              {"spikes", spikes},
              {"summary", summary},
              {"surface",
               {{"vertices", r.mesh.vertex_count()},
                {"faces", r.mesh.face_count()},
                {"param_iterations", r.map.iterations_used},
                {"param_final_energy", r.map.final_energy},
                {"grid_dims", r.grid.dims},
                {"grid_spacing", {r.grid.spacing[0], r.grid.spacing[1], r.grid.spacing[2]}}}},
              {"metadata",
               {{"summary_features", "interpretable stand-ins; not the published spiculation scores"},
                {"classification_rule", "apex angle below theta_spic_deg is spiculation, otherwise lobulation; "
                                        "fewer than min_vertices or lower than min_height_mm is other (base)"}}}};
  return doc.dump(2) + "\n";
}

void write_annotate_outputs(const AnnotateResult& r, const PipelineConfig& config,
                            const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<std::string> comments;
  for (const auto& [k, v] : config.entries()) comments.push_back("config " + k + "=" + v);
  write_ply(r.mesh, out_dir / "mesh.ply", comments);

  {
    std::ofstream out(out_dir / "annotation.json", std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + (out_dir / "annotation.json").string());
    out << annotation_json(r, config);
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + (out_dir / "annotation.json").string());
  }

  NrrdWriteOptions opts;
  opts.encoding = NrrdEncoding::Gzip;
  for (const auto& [k, v] : config.entries()) opts.key_values["config." + k] = v;
  write_nrrd(r.masks, out_dir / "masks.nrrd", opts);
}

}  // namespace cir
