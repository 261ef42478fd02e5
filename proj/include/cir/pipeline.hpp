#pragma once

#include <filesystem>
#include <string>

#include "cir/config.hpp"
#include "cir/mesh.hpp"
#include "cir/spherical.hpp"
#include "cir/spikes.hpp"
#include "cir/volume.hpp"

namespace cir {

struct AnnotateResult {
  MaskVolume grid;  // isotropic input the surface was extracted from
  TriMesh mesh;     // with "epsilon" and "class" channels
  SphericalMap map;
  AreaDistortionMap distortion;
  NoduleAnnotation annotation;
  MaskVolume masks;  // voxelized classes on `grid`
};

SpikeOptions spike_options(const PipelineConfig& config);

/// Resample, isosurface, keep the largest component, parameterize, detect and
/// classify spikes, then voxelize the vertex classes back onto the grid.
AnnotateResult annotate_volume(const MaskVolume& mask, const PipelineConfig& config);

/// Annotation report with the config, spike list, summary and spike parameters.
std::string annotation_json(const AnnotateResult& result, const PipelineConfig& config);

/// Writes mesh.ply, annotation.json and masks.nrrd into `out_dir`, each
/// carrying the effective config. Outputs depend only on their inputs.
void write_annotate_outputs(const AnnotateResult& result, const PipelineConfig& config,
                            const std::filesystem::path& out_dir);

}  // namespace cir
