#include "cir/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <zlib.h>

#include "cir/error.hpp"

namespace cir {

MaskVolume::MaskVolume(std::array<int, 3> dims_, Eigen::Vector3d spacing_, Eigen::Vector3d origin_)
    : dims(dims_), spacing(std::move(spacing_)), origin(std::move(origin_)) {
  if (dims[0] < 0 || dims[1] < 0 || dims[2] < 0) {
    throw Error(ErrorCode::InvalidVolume, "negative dimension");
  }
  labels.assign(voxel_count(), label::kBackground);
}

std::size_t MaskVolume::count_label(std::uint8_t value) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), value));
}

std::size_t MaskVolume::count_foreground() const {
  return labels.size() - count_label(label::kBackground);
}

void MaskVolume::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] <= 0) throw Error(ErrorCode::InvalidVolume, "non-positive dimension");
    if (!std::isfinite(spacing[a]) || spacing[a] <= 0.0) {
      throw Error(ErrorCode::InvalidVolume, "spacing must be positive and finite");
    }
    if (!std::isfinite(origin[a])) throw Error(ErrorCode::InvalidVolume, "non-finite origin");
  }
  if (labels.size() != voxel_count()) {
    throw Error(ErrorCode::InvalidVolume, "label array length does not match dims");
  }
  bool allowed[256] = {};
  for (auto code : label_alphabet) allowed[code] = true;
  for (auto v : labels) {
    if (!allowed[v]) {
      throw Error(ErrorCode::InvalidVolume, "label " + std::to_string(v) + " not in alphabet");
    }
  }
}

namespace {

enum class ScalarType { U8, I16, U16 };

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

ScalarType parse_type(const std::string& raw) {
  const auto t = lower(raw);
  if (t == "uchar" || t == "unsigned char" || t == "uint8" || t == "uint8_t") return ScalarType::U8;
  if (t == "short" || t == "short int" || t == "signed short" || t == "signed short int" ||
      t == "int16" || t == "int16_t") {
    return ScalarType::I16;
  }
  if (t == "ushort" || t == "unsigned short" || t == "unsigned short int" || t == "uint16" ||
      t == "uint16_t") {
    return ScalarType::U16;
  }
  throw Error(ErrorCode::UnsupportedHeaderField, "type: " + raw);
}

std::size_t type_size(ScalarType t) { return t == ScalarType::U8 ? 1 : 2; }

// Parses "(a,b,c)" vectors separated by whitespace.
std::vector<Eigen::Vector3d> parse_vectors(const std::string& value) {
  std::vector<Eigen::Vector3d> out;
  std::size_t pos = 0;
  while ((pos = value.find('(', pos)) != std::string::npos) {
    auto end = value.find(')', pos);
    if (end == std::string::npos) {
      throw Error(ErrorCode::UnsupportedHeaderField, "unterminated vector: " + value);
    }
    std::string inner = value.substr(pos + 1, end - pos - 1);
    std::replace(inner.begin(), inner.end(), ',', ' ');
    std::istringstream is(inner);
    Eigen::Vector3d v;
    if (!(is >> v[0] >> v[1] >> v[2])) {
      throw Error(ErrorCode::UnsupportedHeaderField, "expected 3-vector: " + value);
    }
    out.push_back(v);
    pos = end + 1;
  }
  return out;
}

struct NrrdHeader {
  int dimension = -1;
  std::array<int, 3> sizes{0, 0, 0};
  ScalarType type = ScalarType::U8;
  bool have_type = false;
  NrrdEncoding encoding = NrrdEncoding::Raw;
  bool little_endian = true;
  bool have_endian = false;
  std::optional<Eigen::Vector3d> spacing;
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  std::map<std::string, std::string> key_values;
};

NrrdHeader parse_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::IoError, "empty file");
  line = trim(line);
  if (line.size() != 8 || line.rfind("NRRD000", 0) != 0 || line[7] < '1' || line[7] > '5') {
    throw Error(ErrorCode::UnsupportedHeaderField, "bad magic line: " + line);
  }
  NrrdHeader h;
  std::optional<Eigen::Vector3d> spacings_field;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) return h;
    if (line[0] == '#') continue;
    if (auto kv = line.find(":="); kv != std::string::npos) {
      h.key_values[trim(line.substr(0, kv))] = trim(line.substr(kv + 2));
      continue;
    }
    auto colon = line.find(": ");
    if (colon == std::string::npos) {
      throw Error(ErrorCode::UnsupportedHeaderField, "malformed header line: " + line);
    }
    const auto field = lower(trim(line.substr(0, colon)));
    const auto value = trim(line.substr(colon + 2));
    if (field == "dimension") {
      h.dimension = std::stoi(value);
      if (h.dimension != 3) throw Error(ErrorCode::UnsupportedHeaderField, "dimension: " + value);
    } else if (field == "type") {
      h.type = parse_type(value);
      h.have_type = true;
    } else if (field == "sizes") {
      std::istringstream is(value);
      std::vector<long> s{std::istream_iterator<long>(is), std::istream_iterator<long>()};
      if (s.size() != 3 || s[0] <= 0 || s[1] <= 0 || s[2] <= 0) {
        throw Error(ErrorCode::UnsupportedHeaderField, "sizes: " + value);
      }
      h.sizes = {static_cast<int>(s[0]), static_cast<int>(s[1]), static_cast<int>(s[2])};
    } else if (field == "encoding") {
      const auto e = lower(value);
      if (e == "raw") {
        h.encoding = NrrdEncoding::Raw;
      } else if (e == "gzip" || e == "gz") {
        h.encoding = NrrdEncoding::Gzip;
      } else {
        throw Error(ErrorCode::UnsupportedHeaderField, "encoding: " + value);
      }
    } else if (field == "endian") {
      const auto e = lower(value);
      if (e != "little" && e != "big") throw Error(ErrorCode::UnsupportedHeaderField, "endian: " + value);
      h.little_endian = e == "little";
      h.have_endian = true;
    } else if (field == "space directions") {
      auto dirs = parse_vectors(value);
      if (dirs.size() != 3) throw Error(ErrorCode::UnsupportedHeaderField, "space directions: " + value);
      Eigen::Vector3d s;
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          if (a != b && dirs[a][b] != 0.0) {
            throw Error(ErrorCode::UnsupportedHeaderField, "non-diagonal space directions");
          }
        }
        s[a] = dirs[a].norm();
      }
      h.spacing = s;
    } else if (field == "spacings") {
      std::istringstream is(value);
      Eigen::Vector3d s;
      if (!(is >> s[0] >> s[1] >> s[2])) throw Error(ErrorCode::UnsupportedHeaderField, "spacings: " + value);
      spacings_field = s;
    } else if (field == "space origin") {
      auto o = parse_vectors(value);
      if (o.size() != 1) throw Error(ErrorCode::UnsupportedHeaderField, "space origin: " + value);
      h.origin = o[0];
    } else if (field == "data file" || field == "datafile") {
      throw Error(ErrorCode::UnsupportedHeaderField, "detached data files are not supported");
    } else if (field == "byte skip" || field == "byteskip" || field == "line skip" ||
               field == "lineskip") {
      if (std::stol(value) != 0) throw Error(ErrorCode::UnsupportedHeaderField, field + ": " + value);
    } else if (field == "space dimension") {
      if (std::stoi(value) != 3) throw Error(ErrorCode::UnsupportedHeaderField, "space dimension: " + value);
    }
    // Descriptive fields (content, kinds, space, units, ...) carry no geometry we use.
  }
  throw Error(ErrorCode::IoError, "header not terminated by a blank line");
}

std::vector<unsigned char> gunzip(const std::vector<unsigned char>& in) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw Error(ErrorCode::IoError, "inflateInit2 failed");
  std::vector<unsigned char> out;
  std::vector<unsigned char> chunk(1 << 16);
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int ret = Z_OK;
  while (ret != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    ret = inflate(&zs, Z_NO_FLUSH);
    if (ret != Z_OK && ret != Z_STREAM_END) {
      inflateEnd(&zs);
      throw Error(ErrorCode::SizeMismatch, "corrupt or truncated gzip payload");
    }
    out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    if (ret == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw Error(ErrorCode::SizeMismatch, "truncated gzip payload");
    }
  }
  inflateEnd(&zs);
  return out;
}

std::vector<unsigned char> gzip(const std::vector<unsigned char>& in) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error(ErrorCode::IoError, "deflateInit2 failed");
  }
  std::vector<unsigned char> out(deflateBound(&zs, static_cast<uLong>(in.size())) + 32);
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  if (deflate(&zs, Z_FINISH) != Z_STREAM_END) {
    deflateEnd(&zs);
    throw Error(ErrorCode::IoError, "deflate failed");
  }
  out.resize(zs.total_out);
  deflateEnd(&zs);
  return out;
}

std::vector<std::uint8_t> parse_alphabet(const std::string& value) {
  std::istringstream is(value);
  std::vector<std::uint8_t> out;
  int code;
  while (is >> code) {
    if (code < 0 || code > 255) throw Error(ErrorCode::InvalidVolume, "label code out of range");
    out.push_back(static_cast<std::uint8_t>(code));
  }
  if (out.empty()) throw Error(ErrorCode::InvalidVolume, "empty label_alphabet");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::map<std::string, std::string> read_nrrd_key_values(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return parse_header(in).key_values;
}

MaskVolume read_nrrd(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  const NrrdHeader h = parse_header(in);
  if (h.dimension != 3) throw Error(ErrorCode::UnsupportedHeaderField, "missing dimension field");
  if (!h.have_type) throw Error(ErrorCode::UnsupportedHeaderField, "missing type field");
  if (h.sizes[0] == 0) throw Error(ErrorCode::UnsupportedHeaderField, "missing sizes field");
  const std::size_t elem = type_size(h.type);
  if (elem > 1 && (!h.have_endian || !h.little_endian)) {
    throw Error(ErrorCode::UnsupportedHeaderField, "multi-byte payloads require 'endian: little'");
  }

  std::vector<unsigned char> payload{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed: " + path.string());
  if (h.encoding == NrrdEncoding::Gzip) payload = gunzip(payload);

  MaskVolume vol(h.sizes, h.spacing.value_or(Eigen::Vector3d::Ones()), h.origin);
  const std::size_t n = vol.voxel_count();
  if (payload.size() != n * elem) {
    throw Error(ErrorCode::SizeMismatch, "payload has " + std::to_string(payload.size()) +
                                             " bytes, expected " + std::to_string(n * elem));
  }

  std::optional<std::vector<std::uint8_t>> alphabet;
  if (auto it = h.key_values.find("label_alphabet"); it != h.key_values.end()) {
    alphabet = parse_alphabet(it->second);
  }
  for (std::size_t i = 0; i < n; ++i) {
    long v = 0;
    switch (h.type) {
      case ScalarType::U8: v = payload[i]; break;
      case ScalarType::I16: {
        std::int16_t s;
        std::memcpy(&s, &payload[2 * i], 2);
        v = s;
        break;
      }
      case ScalarType::U16: {
        std::uint16_t s;
        std::memcpy(&s, &payload[2 * i], 2);
        v = s;
        break;
      }
    }
    if (alphabet) {
      if (v < 0 || v > 255) throw Error(ErrorCode::InvalidVolume, "label value out of range");
      vol.labels[i] = static_cast<std::uint8_t>(v);
    } else {
      vol.labels[i] = v != 0 ? label::kNoduleBase : label::kBackground;
    }
  }
  if (alphabet) vol.label_alphabet = *alphabet;
  vol.validate();
  return vol;
}

void write_nrrd(const MaskVolume& vol, const std::filesystem::path& path,
                const NrrdWriteOptions& options) {
  vol.validate();
  std::ostringstream hdr;
  hdr << "NRRD0004\n"
      << "# Complete NRRD file format specification at:\n"
      << "# http://teem.sourceforge.net/nrrd/format.html\n"
      << "type: uint8\n"
      << "dimension: 3\n"
      << "space: left-posterior-superior\n"
      << "sizes: " << vol.dims[0] << ' ' << vol.dims[1] << ' ' << vol.dims[2] << '\n'
      << "space directions: (" << format_double(vol.spacing[0]) << ",0,0) (0,"
      << format_double(vol.spacing[1]) << ",0) (0,0," << format_double(vol.spacing[2]) << ")\n"
      << "kinds: domain domain domain\n"
      << "encoding: " << (options.encoding == NrrdEncoding::Gzip ? "gzip" : "raw") << '\n'
      << "space origin: (" << format_double(vol.origin[0]) << ',' << format_double(vol.origin[1])
      << ',' << format_double(vol.origin[2]) << ")\n";
  hdr << "label_alphabet:=";
  for (std::size_t i = 0; i < vol.label_alphabet.size(); ++i) {
    hdr << (i ? " " : "") << static_cast<int>(vol.label_alphabet[i]);
  }
  hdr << '\n';
  for (const auto& [k, v] : options.key_values) {
    if (k.find(":=") != std::string::npos || k.find('\n') != std::string::npos ||
        v.find('\n') != std::string::npos) {
      throw Error(ErrorCode::IoError, "key/value pairs must be single-line: " + k);
    }
    hdr << k << ":=" << v << '\n';
  }
  hdr << '\n';

  std::vector<unsigned char> payload(vol.labels.begin(), vol.labels.end());
  if (options.encoding == NrrdEncoding::Gzip) payload = gzip(payload);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  const auto header = hdr.str();
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

MaskVolume resample_isotropic(const MaskVolume& vol, std::optional<double> target) {
  vol.validate();
  const double t = target.value_or(vol.spacing.minCoeff());
  if (!std::isfinite(t) || t <= 0.0) throw Error(ErrorCode::DegenerateTarget, "target spacing must be > 0");

  std::array<int, 3> out_dims{};
  std::array<std::vector<int>, 3> source_index;
  for (int a = 0; a < 3; ++a) {
    const double extent = vol.dims[a] * vol.spacing[a];
    out_dims[a] = std::max(1, static_cast<int>(std::lround(extent / t)));
    const double ratio = t / vol.spacing[a];
    source_index[a].resize(out_dims[a]);
    for (int j = 0; j < out_dims[a]; ++j) {
      // Continuous input index of the output voxel center; ties go to the lower index.
      const double u = (j + 0.5) * ratio - 0.5;
      const int i = static_cast<int>(std::ceil(u - 0.5));
      source_index[a][j] = std::clamp(i, 0, vol.dims[a] - 1);
    }
  }

  Eigen::Vector3d out_origin = vol.origin + 0.5 * (Eigen::Vector3d::Constant(t) - vol.spacing);
  MaskVolume out(out_dims, Eigen::Vector3d::Constant(t), out_origin);
  out.label_alphabet = vol.label_alphabet;
  for (int k = 0; k < out_dims[2]; ++k) {
    for (int j = 0; j < out_dims[1]; ++j) {
      for (int i = 0; i < out_dims[0]; ++i) {
        out.at(i, j, k) = vol.at(source_index[0][i], source_index[1][j], source_index[2][k]);
      }
    }
  }
  return out;
}

}  // namespace cir
