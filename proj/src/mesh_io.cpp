#include <cstdio>
#include <fstream>
#include <sstream>

#include "cir/error.hpp"
#include "cir/mesh.hpp"

namespace cir {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int parse_obj_index(const std::string& token, int vertex_count, int line_no) {
  const auto slash = token.find('/');
  const std::string head = token.substr(0, slash);
  int idx = 0;
  try {
    std::size_t used = 0;
    idx = std::stoi(head, &used);
    if (used != head.size()) throw std::invalid_argument(head);
  } catch (const std::exception&) {
    throw Error(ErrorCode::MalformedFile, "line " + std::to_string(line_no) + ": bad face index '" + token + "'");
  }
  if (idx < 0) idx = vertex_count + idx + 1;
  if (idx < 1 || idx > vertex_count) {
    throw Error(ErrorCode::MalformedFile, "line " + std::to_string(line_no) + ": face index out of range");
  }
  return idx - 1;
}

}  // namespace

TriMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<Eigen::Vector3d> verts;
  std::vector<Eigen::Vector3i> faces;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream is(line);
    std::string tag;
    if (!(is >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Eigen::Vector3d p;
      if (!(is >> p[0] >> p[1] >> p[2])) {
        throw Error(ErrorCode::MalformedFile, "line " + std::to_string(line_no) + ": bad vertex");
      }
      verts.push_back(p);
    } else if (tag == "f") {
      std::vector<std::string> tokens;
      for (std::string t; is >> t;) tokens.push_back(t);
      if (tokens.size() != 3) {
        throw Error(ErrorCode::MalformedFile,
                    "line " + std::to_string(line_no) + ": only triangular faces are supported");
      }
      const int nv = static_cast<int>(verts.size());
      faces.emplace_back(parse_obj_index(tokens[0], nv, line_no), parse_obj_index(tokens[1], nv, line_no),
                         parse_obj_index(tokens[2], nv, line_no));
    }
  }
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed: " + path.string());
  TriMesh mesh;
  mesh.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(i) = verts[i].transpose();
  mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t i = 0; i < faces.size(); ++i) mesh.faces.row(i) = faces[i].transpose();
  return mesh;
}

void write_obj(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    out << "v " << fmt(mesh.vertices(v, 0)) << ' ' << fmt(mesh.vertices(v, 1)) << ' ' << fmt(mesh.vertices(v, 2))
        << '\n';
  }
  for (int f = 0; f < mesh.face_count(); ++f) {
    out << "f " << mesh.faces(f, 0) + 1 << ' ' << mesh.faces(f, 1) + 1 << ' ' << mesh.faces(f, 2) + 1 << '\n';
  }
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

std::array<std::uint8_t, 3> class_color(int vertex_class) {
  switch (vertex_class) {
    case 1: return {255, 0, 0};
    case 2: return {0, 0, 255};
    default: return {255, 255, 255};
  }
}

void write_ply(const TriMesh& mesh, const std::filesystem::path& path, const std::vector<std::string>& comments) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  const auto class_it = mesh.channels.find("class");
  const bool has_class = class_it != mesh.channels.end();

  out << "ply\nformat ascii 1.0\n";
  for (const auto& c : comments) {
    if (c.find('\n') != std::string::npos) throw Error(ErrorCode::IoError, "PLY comments must be single-line");
    out << "comment " << c << '\n';
  }
  out << "element vertex " << mesh.vertex_count() << '\n'
      << "property double x\nproperty double y\nproperty double z\n";
  for (const auto& [name, values] : mesh.channels) {
    out << "property " << (name == "class" ? "uchar " : "float ") << name << '\n';
  }
  if (has_class) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "element face " << mesh.face_count() << '\n'
      << "property list uchar int vertex_indices\nend_header\n";

  char buf[64];
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    out << fmt(mesh.vertices(v, 0)) << ' ' << fmt(mesh.vertices(v, 1)) << ' ' << fmt(mesh.vertices(v, 2));
    for (const auto& [name, values] : mesh.channels) {
      if (name == "class") {
        out << ' ' << static_cast<int>(values[v]);
      } else {
        std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(static_cast<float>(values[v])));
        out << ' ' << buf;
      }
    }
    if (has_class) {
      const auto rgb = class_color(static_cast<int>(class_it->second[v]));
      out << ' ' << int{rgb[0]} << ' ' << int{rgb[1]} << ' ' << int{rgb[2]};
    }
    out << '\n';
  }
  for (int f = 0; f < mesh.face_count(); ++f) {
    out << "3 " << mesh.faces(f, 0) << ' ' << mesh.faces(f, 1) << ' ' << mesh.faces(f, 2) << '\n';
  }
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

TriMesh read_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) throw Error(ErrorCode::MalformedFile, "missing 'ply' magic");

  long n_vertices = -1;
  long n_faces = -1;
  std::vector<std::string> vprops;
  std::string current;
  bool ascii = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream is(line);
    std::string tag;
    is >> tag;
    if (tag == "format") {
      std::string f;
      is >> f;
      ascii = f == "ascii";
    } else if (tag == "element") {
      long n = 0;
      is >> current >> n;
      if (current == "vertex") n_vertices = n;
      if (current == "face") n_faces = n;
    } else if (tag == "property" && current == "vertex") {
      std::string type, name;
      is >> type >> name;
      if (type == "list") throw Error(ErrorCode::MalformedFile, "list vertex properties are not supported");
      vprops.push_back(name);
    } else if (tag == "end_header") {
      break;
    }
  }
  if (!ascii) throw Error(ErrorCode::MalformedFile, "only ascii PLY is supported");
  if (n_vertices < 0 || n_faces < 0) throw Error(ErrorCode::MalformedFile, "missing vertex/face elements");

  TriMesh mesh;
  mesh.vertices.resize(n_vertices, 3);
  std::vector<std::string> channel_names;
  for (const auto& p : vprops) {
    if (p != "x" && p != "y" && p != "z" && p != "red" && p != "green" && p != "blue") channel_names.push_back(p);
  }
  for (const auto& c : channel_names) mesh.channels[c] = Eigen::VectorXd::Zero(n_vertices);
  for (long v = 0; v < n_vertices; ++v) {
    for (const auto& p : vprops) {
      double value;
      if (!(in >> value)) throw Error(ErrorCode::MalformedFile, "truncated vertex data");
      if (p == "x") mesh.vertices(v, 0) = value;
      else if (p == "y") mesh.vertices(v, 1) = value;
      else if (p == "z") mesh.vertices(v, 2) = value;
      else if (auto it = mesh.channels.find(p); it != mesh.channels.end()) it->second[v] = value;
    }
  }
  mesh.faces.resize(n_faces, 3);
  for (long f = 0; f < n_faces; ++f) {
    int count = 0;
    if (!(in >> count)) throw Error(ErrorCode::MalformedFile, "truncated face data");
    if (count != 3) throw Error(ErrorCode::MalformedFile, "only triangular faces are supported");
    for (int c = 0; c < 3; ++c) {
      int idx;
      if (!(in >> idx)) throw Error(ErrorCode::MalformedFile, "truncated face data");
      if (idx < 0 || idx >= n_vertices) throw Error(ErrorCode::MalformedFile, "face index out of range");
      mesh.faces(f, c) = idx;
    }
  }
  return mesh;
}

}  // namespace cir
