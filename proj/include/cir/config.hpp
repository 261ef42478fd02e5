#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cir {

/// Every tunable of the annotate pipeline.
struct PipelineConfig {
  std::optional<double> target_spacing;  // mm; empty means the finest input spacing
  double noise_floor = -0.02;
  double theta_spic_deg = 65.0;
  double min_height_mm = 1.0;
  int min_vertices = 8;
  int param_max_iters = 10000;
  double param_tol = 1e-7;
  double threshold = 0.5;
  int smooth_iterations = 0;  // Taubin passes before parameterization

  /// Throws Error(InvalidConfig) for out-of-range values.
  void validate() const;

  /// Applies one "key=value" setting. Throws Error(InvalidConfig) for unknown
  /// keys and unparsable values.
  void set(const std::string& key, const std::string& value);

  /// Key/value pairs in a fixed order; numbers use the shortest exact form.
  std::vector<std::pair<std::string, std::string>> entries() const;

  /// One "key=value" line per entry.
  std::string to_text() const;
};

/// Reads a key=value file; blank lines and lines starting with '#' are skipped.
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

/// Shortest decimal string that reads back to the same double.
std::string format_double(double value);

}  // namespace cir
