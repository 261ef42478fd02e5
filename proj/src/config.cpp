#include "cir/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "cir/error.hpp"

namespace cir {

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size() || !std::isfinite(out)) {
    throw Error(ErrorCode::InvalidConfig, key + ": not a finite number: '" + value + "'");
  }
  return out;
}

int parse_int(const std::string& key, const std::string& value) {
  int out = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw Error(ErrorCode::InvalidConfig, key + ": not an integer: '" + value + "'");
  }
  return out;
}

}  // namespace

void PipelineConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::InvalidConfig, what);
  };
  require(!target_spacing || (std::isfinite(*target_spacing) && *target_spacing > 0.0),
          "target_spacing must be positive or auto");
  require(std::isfinite(noise_floor) && noise_floor <= 0.0, "noise_floor must be <= 0");
  require(theta_spic_deg > 0.0 && theta_spic_deg < 180.0, "theta_spic_deg must be in (0, 180)");
  require(std::isfinite(min_height_mm) && min_height_mm >= 0.0, "min_height_mm must be >= 0");
  require(min_vertices >= 1, "min_vertices must be >= 1");
  require(param_max_iters >= 0, "param_max_iters must be >= 0");
  require(std::isfinite(param_tol) && param_tol >= 0.0, "param_tol must be >= 0");
  require(threshold >= 0.0 && threshold <= 1.0, "threshold must be in [0, 1]");
  require(smooth_iterations >= 0, "smooth_iterations must be >= 0");
}

void PipelineConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  if (key == "target_spacing") {
    if (value == "auto") target_spacing.reset();
    else target_spacing = parse_double(key, value);
  } else if (key == "noise_floor") {
    noise_floor = parse_double(key, value);
  } else if (key == "theta_spic_deg") {
    theta_spic_deg = parse_double(key, value);
  } else if (key == "min_height_mm") {
    min_height_mm = parse_double(key, value);
  } else if (key == "min_vertices") {
    min_vertices = parse_int(key, value);
  } else if (key == "param_max_iters") {
    param_max_iters = parse_int(key, value);
  } else if (key == "param_tol") {
    param_tol = parse_double(key, value);
  } else if (key == "threshold") {
    threshold = parse_double(key, value);
  } else if (key == "smooth_iterations") {
    smooth_iterations = parse_int(key, value);
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown config key: '" + key + "'");
  }
}

std::vector<std::pair<std::string, std::string>> PipelineConfig::entries() const {
  return {
      {"target_spacing", target_spacing ? format_double(*target_spacing) : "auto"},
      {"noise_floor", format_double(noise_floor)},
      {"theta_spic_deg", format_double(theta_spic_deg)},
      {"min_height_mm", format_double(min_height_mm)},
      {"min_vertices", std::to_string(min_vertices)},
      {"param_max_iters", std::to_string(param_max_iters)},
      {"param_tol", format_double(param_tol)},
      {"threshold", format_double(threshold)},
      {"smooth_iterations", std::to_string(smooth_iterations)},
  };
}

std::string PipelineConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += k + "=" + v + "\n";
  return out;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidConfig, path.string() + ":" + std::to_string(number) + ": expected key=value");
    }
    base.set(t.substr(0, eq), t.substr(eq + 1));
  }
  base.validate();
  return base;
}

}  // namespace cir
