#include "dpcc/io.hpp"

#include "dpcc/bytes.hpp"
#include "dpcc/error.hpp"
#include "dpcc/slim_conv.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace dpcc {

namespace {

struct PlyProperty {
  std::string type;
  std::string name;
  bool is_list = false;
};

struct PlyElement {
  std::string name;
  size_t count = 0;
  std::vector<PlyProperty> props;
};

size_t type_size(const std::string& t) {
  static const std::map<std::string, size_t> sizes{
      {"char", 1},   {"uchar", 1},  {"int8", 1},   {"uint8", 1},    {"short", 2},  {"ushort", 2},
      {"int16", 2},  {"uint16", 2}, {"int", 4},    {"uint", 4},     {"int32", 4},  {"uint32", 4},
      {"float", 4},  {"float32", 4}, {"double", 8}, {"float64", 8}};
  auto it = sizes.find(t);
  if (it == sizes.end()) throw Error(Errc::MalformedHeader, "unknown property type " + t);
  return it->second;
}

double read_binary(const uint8_t* p, const std::string& t) {
  auto get = [p](auto v) {
    std::memcpy(&v, p, sizeof(v));
    return static_cast<double>(v);
  };
  if (t == "char" || t == "int8") return get(int8_t{});
  if (t == "uchar" || t == "uint8") return get(uint8_t{});
  if (t == "short" || t == "int16") return get(int16_t{});
  if (t == "ushort" || t == "uint16") return get(uint16_t{});
  if (t == "int" || t == "int32") return get(int32_t{});
  if (t == "uint" || t == "uint32") return get(uint32_t{});
  if (t == "float" || t == "float32") return get(float{});
  return get(double{});
}

}  // namespace

Frame parse_ply(const std::string& data) {
  std::istringstream in(data);
  std::string line;
  if (!std::getline(in, line) || line.substr(0, 3) != "ply") throw Error(Errc::MalformedHeader, "missing ply magic");
  bool binary = false;
  bool have_format = false;
  std::vector<PlyElement> elements;
  int bit_depth = 0;
  for (;;) {
    if (!std::getline(in, line)) throw Error(Errc::MalformedHeader, "header not terminated");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "end_header") break;
    if (word == "comment") {
      std::string key;
      int v = 0;
      if (ls >> key && key == "bit_depth" && ls >> v && v > 0 && v <= 30) bit_depth = v;
      continue;
    }
    if (word == "obj_info" || word.empty()) continue;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii")
        binary = false;
      else if (fmt == "binary_little_endian")
        binary = true;
      else
        throw Error(Errc::UnsupportedFormat, "unsupported ply format " + fmt);
      have_format = true;
    } else if (word == "element") {
      PlyElement e;
      long long n = -1;
      ls >> e.name >> n;
      if (!ls || n < 0) throw Error(Errc::MalformedHeader, "bad element line: " + line);
      e.count = static_cast<size_t>(n);
      elements.push_back(e);
    } else if (word == "property") {
      if (elements.empty()) throw Error(Errc::MalformedHeader, "property before any element");
      PlyProperty p;
      ls >> p.type;
      if (p.type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type;
        p.is_list = true;
        p.type = item_type;
      }
      ls >> p.name;
      if (!ls) throw Error(Errc::MalformedHeader, "bad property line: " + line);
      type_size(p.type);
      elements.back().props.push_back(p);
    } else {
      throw Error(Errc::MalformedHeader, "unexpected header line: " + line);
    }
  }
  if (!have_format) throw Error(Errc::MalformedHeader, "missing format line");

  Frame frame;
  size_t offset = static_cast<size_t>(in.tellg());
  for (const auto& e : elements) {
    const bool is_vertex = e.name == "vertex";
    int ix = -1, iy = -1, iz = -1;
    if (is_vertex) {
      for (size_t i = 0; i < e.props.size(); ++i) {
        if (e.props[i].name == "x") ix = static_cast<int>(i);
        if (e.props[i].name == "y") iy = static_cast<int>(i);
        if (e.props[i].name == "z") iz = static_cast<int>(i);
      }
      if (ix < 0 || iy < 0 || iz < 0) throw Error(Errc::MalformedHeader, "vertex element lacks x, y or z");
      for (const auto& p : e.props)
        if (p.is_list) throw Error(Errc::UnsupportedFormat, "list property in the vertex element");
    }
    if (!binary) {
      for (size_t r = 0; r < e.count; ++r) {
        if (!std::getline(in, line)) throw Error(Errc::MalformedHeader, "truncated ascii body");
        if (!is_vertex) continue;
        std::istringstream ls(line);
        std::vector<double> v(e.props.size());
        for (auto& x : v)
          if (!(ls >> x)) throw Error(Errc::MalformedHeader, "short vertex line");
        frame.points.push_back({v[ix], v[iy], v[iz]});
      }
    } else {
      const auto* base = reinterpret_cast<const uint8_t*>(data.data());
      for (size_t r = 0; r < e.count; ++r) {
        std::vector<double> v(e.props.size());
        for (size_t i = 0; i < e.props.size(); ++i) {
          const auto& p = e.props[i];
          if (p.is_list) throw Error(Errc::UnsupportedFormat, "binary list properties before the vertex data");
          const size_t sz = type_size(p.type);
          if (offset + sz > data.size()) throw Error(Errc::MalformedHeader, "truncated binary body");
          v[i] = read_binary(base + offset, p.type);
          offset += sz;
        }
        if (is_vertex) frame.points.push_back({v[ix], v[iy], v[iz]});
      }
    }
    if (is_vertex) {
      // The depth tag is trusted only when every coordinate fits it.
      const double side = std::ldexp(1.0, bit_depth);
      bool fits = bit_depth > 0;
      for (const auto& p : frame.points)
        for (double c : p) fits = fits && c >= 0 && c < side && c == std::floor(c);
      frame.bit_depth = fits ? bit_depth : 0;
      return frame;
    }
  }
  throw Error(Errc::MalformedHeader, "no vertex element");
}

Frame read_ply(const std::string& path) {
  const auto bytes = read_file(path);
  return parse_ply(std::string(bytes.begin(), bytes.end()));
}

std::string format_ply(const Frame& frame, PlyFormat format) {
  const bool ints = frame.bit_depth > 0;
  std::ostringstream out;
  out << "ply\nformat " << (format == PlyFormat::Ascii ? "ascii" : "binary_little_endian") << " 1.0\n";
  if (frame.bit_depth > 0) out << "comment bit_depth " << frame.bit_depth << "\n";
  out << "element vertex " << frame.points.size() << "\n";
  for (const char* n : {"x", "y", "z"}) out << "property " << (ints ? "int" : "double") << " " << n << "\n";
  out << "end_header\n";
  if (format == PlyFormat::Ascii) {
    out.precision(std::numeric_limits<double>::max_digits10);
    for (const auto& p : frame.points) {
      if (ints)
        out << static_cast<int64_t>(p[0]) << " " << static_cast<int64_t>(p[1]) << " " << static_cast<int64_t>(p[2])
            << "\n";
      else
        out << p[0] << " " << p[1] << " " << p[2] << "\n";
    }
    return out.str();
  }
  std::string s = out.str();
  for (const auto& p : frame.points) {
    for (double v : p) {
      if (ints) {
        const auto i = static_cast<int32_t>(v);
        s.append(reinterpret_cast<const char*>(&i), 4);
      } else {
        s.append(reinterpret_cast<const char*>(&v), 8);
      }
    }
  }
  return s;
}

void write_ply(const Frame& frame, const std::string& path, PlyFormat format) {
  const std::string s = format_ply(frame, format);
  write_file(path, {reinterpret_cast<const uint8_t*>(s.data()), s.size()});
}

namespace {

struct Fit {
  std::array<double, 3> lo{};
  double scale = 1.0;
};

Fit bbox_fit(const std::vector<const Frame*>& frames, int depth) {
  std::array<double, 3> lo{}, hi{};
  bool any = false;
  for (const auto* f : frames)
    for (const auto& p : f->points)
      for (int a = 0; a < 3; ++a) {
        lo[a] = any ? std::min(lo[a], p[a]) : p[a];
        hi[a] = any ? std::max(hi[a], p[a]) : p[a];
        any = any || a == 2;
      }
  double extent = 0.0;
  for (int a = 0; a < 3; ++a) extent = std::max(extent, hi[a] - lo[a]);
  if (!(extent > 0.0) || !std::isfinite(extent)) throw Error(Errc::DegenerateExtent, "point cloud has zero extent");
  // The largest coordinate maps into the last voxel.
  return {lo, (std::ldexp(1.0, depth) - 1.0) / extent};
}

Frame quantize(const Frame& frame, int depth, const Fit& fit) {
  const double side = std::ldexp(1.0, depth);
  Frame out;
  out.bit_depth = depth;
  out.sequence_id = frame.sequence_id;
  out.index = frame.index;
  std::set<std::array<int32_t, 3>> seen;
  for (const auto& p : frame.points) {
    std::array<int32_t, 3> q{};
    bool inside = true;
    for (int a = 0; a < 3; ++a) {
      const double v = std::floor((p[a] - fit.lo[a]) * fit.scale);
      if (v < 0.0 || v >= side) inside = false;
      q[a] = static_cast<int32_t>(v);
    }
    if (inside) seen.insert(q);
  }
  for (const auto& q : seen) out.points.push_back({double(q[0]), double(q[1]), double(q[2])});
  return out;
}

void check_depth(int depth) {
  if (depth < 1 || depth > 16) throw Error(Errc::BadSpec, "depth must be in [1, 16]");
}

}  // namespace

Frame voxelize(const Frame& frame, int depth) {
  check_depth(depth);
  if (frame.points.empty()) return quantize(frame, depth, {});
  if (frame.bit_depth > 0) return quantize(frame, depth, {{0, 0, 0}, std::ldexp(1.0, depth - frame.bit_depth)});
  return quantize(frame, depth, bbox_fit({&frame}, depth));
}

std::vector<Frame> voxelize_sequence(const std::vector<Frame>& frames, int depth) {
  check_depth(depth);
  std::vector<const Frame*> raw;
  for (const auto& f : frames)
    if (f.bit_depth == 0 && !f.points.empty()) raw.push_back(&f);
  const Fit fit = raw.empty() ? Fit{} : bbox_fit(raw, depth);
  std::vector<Frame> out;
  for (const auto& f : frames) out.push_back(f.bit_depth > 0 || f.points.empty() ? voxelize(f, depth) : quantize(f, depth, fit));
  return out;
}

CoordSet to_coords(const Frame& f) {
  std::vector<Coord> c;
  c.reserve(f.points.size());
  for (const auto& p : f.points)
    c.push_back({static_cast<int32_t>(p[0]), static_cast<int32_t>(p[1]), static_cast<int32_t>(p[2])});
  return CoordSet::from_coords(std::move(c), 1);
}

Frame from_coords(const CoordSet& c, int bit_depth) {
  Frame f;
  f.bit_depth = bit_depth;
  for (const auto& p : c.coords()) f.points.push_back({double(p.x), double(p.y), double(p.z)});
  return f;
}

SynthShape parse_shape(const std::string& name) {
  if (name == "sphere") return SynthShape::Sphere;
  if (name == "cube") return SynthShape::Cube;
  if (name == "two-blob") return SynthShape::TwoBlob;
  throw Error(Errc::BadSpec, "unknown shape " + name);
}

SynthSequence synth_sequence(const SynthSpec& spec) {
  if (spec.points < 1 || spec.frames < 1) throw Error(Errc::BadSpec, "points and frames must be positive");
  if (spec.depth < 3 || spec.depth > 16) throw Error(Errc::BadSpec, "depth must be in [3, 16]");
  for (double v : spec.translation)
    if (!std::isfinite(v)) throw Error(Errc::BadSpec, "non-finite translation");
  if (!std::isfinite(spec.rotation_deg)) throw Error(Errc::BadSpec, "non-finite rotation");

  const double side = std::ldexp(1.0, spec.depth);
  const double c = side / 2.0;
  nn::SplitMix rng(spec.seed);
  std::vector<Point3> base;
  base.reserve(static_cast<size_t>(spec.points));
  auto sphere_point = [&](double cx, double cy, double cz, double r) {
    double x, y, z, n;
    do {
      x = rng.normal();
      y = rng.normal();
      z = rng.normal();
      n = std::sqrt(x * x + y * y + z * z);
    } while (n < 1e-12);
    return Point3{cx + r * x / n, cy + r * y / n, cz + r * z / n};
  };
  for (int i = 0; i < spec.points; ++i) {
    switch (spec.shape) {
      case SynthShape::Sphere:
        base.push_back(sphere_point(c, c, c, 0.3 * side));
        break;
      case SynthShape::Cube: {
        const double h = 0.25 * side;
        Point3 p{rng.uniform(-h, h), rng.uniform(-h, h), rng.uniform(-h, h)};
        const auto face = static_cast<int>(rng.next() % 6);
        p[static_cast<size_t>(face / 2)] = face % 2 ? h : -h;
        base.push_back({c + p[0], c + p[1], c + p[2]});
        break;
      }
      case SynthShape::TwoBlob:
        if (rng.uniform() < 0.6)
          base.push_back(sphere_point(c - 0.14 * side, c, c - 0.05 * side, 0.16 * side));
        else
          base.push_back(sphere_point(c + 0.17 * side, c + 0.05 * side, c + 0.06 * side, 0.12 * side));
        break;
    }
  }

  SynthSequence seq;
  const double rad = spec.rotation_deg * 3.14159265358979323846 / 180.0;
  for (int t = 0; t < spec.frames; ++t) {
    Frame f;
    f.bit_depth = 0;
    f.index = t;
    const double a = rad * t;
    const double ca = std::cos(a), sa = std::sin(a);
    for (const auto& p : base) {
      const double dx = p[0] - c, dy = p[1] - c;
      f.points.push_back({c + ca * dx - sa * dy + spec.translation[0] * t, c + sa * dx + ca * dy + spec.translation[1] * t,
                          p[2] + spec.translation[2] * t});
    }
    // Coordinates are already in voxel units: quantize without refitting.
    Frame q;
    q.bit_depth = spec.depth;
    q.index = t;
    std::set<std::array<int32_t, 3>> seen;
    for (const auto& p : f.points) {
      std::array<int32_t, 3> v{};
      bool inside = true;
      for (int k = 0; k < 3; ++k) {
        const double fl = std::floor(p[static_cast<size_t>(k)]);
        if (fl < 0.0 || fl >= side) inside = false;
        v[static_cast<size_t>(k)] = static_cast<int32_t>(fl);
      }
      if (inside) seen.insert(v);
    }
    for (const auto& v : seen) q.points.push_back({double(v[0]), double(v[1]), double(v[2])});
    seq.frames.push_back(std::move(q));
    seq.translations.push_back(t == 0 ? Point3{0, 0, 0} : spec.translation);
    seq.rotations_deg.push_back(t == 0 ? 0.0 : spec.rotation_deg);
  }
  return seq;
}

}  // namespace dpcc
