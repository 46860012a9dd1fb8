#include "odfnet/io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string_view>

#include "odfnet/bytes.hpp"
#include "odfnet/error.hpp"
#include "odfnet/rng.hpp"

namespace odfnet {

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "' for reading");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::Io, "read failed for '" + path + "'");
  return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
}

namespace {

std::vector<std::string_view> tokenize(std::string_view s) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// Line-oriented scanner with positioned parse errors.
class LineScanner {
 public:
  explicit LineScanner(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw Error(ErrorKind::Io, "cannot open '" + path + "' for reading");
  }

  // Advances to the next line carrying tokens; optionally strips '#' comments.
  bool next_data(bool strip_hash_comments) {
    while (std::getline(in_, line_)) {
      ++line_no_;
      if (!line_.empty() && line_.back() == '\r') line_.pop_back();
      std::string_view view(line_);
      if (strip_hash_comments) {
        const size_t hash = view.find('#');
        if (hash != std::string_view::npos) view = view.substr(0, hash);
      }
      tokens_ = tokenize(view);
      if (!tokens_.empty()) return true;
    }
    if (in_.bad()) throw Error(ErrorKind::Io, "read failed for '" + path_ + "'");
    return false;
  }

  const std::vector<std::string_view>& tokens() const { return tokens_; }

  [[noreturn]] void fail(const std::string& message) const {
    throw Error(ErrorKind::Parse,
                path_ + ":" + std::to_string(line_no_) + ": " + message);
  }

  // For errors discovered at end of file: points just past the last line.
  [[noreturn]] void fail_missing(const std::string& message) const {
    throw Error(ErrorKind::Parse,
                path_ + ":" + std::to_string(line_no_ + 1) + ": " + message);
  }

  double number(std::string_view token, const char* what) const {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size())
      fail(std::string("bad ") + what + " '" + std::string(token) + "'");
    return v;
  }

  long integer(std::string_view token, const char* what) const {
    long v = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size())
      fail(std::string("bad ") + what + " '" + std::string(token) + "'");
    return v;
  }

 private:
  std::string path_;
  std::ifstream in_;
  std::string line_;
  std::vector<std::string_view> tokens_;
  int line_no_ = 0;
};

void append_g(std::string& out, double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  out += buf;
}

}  // namespace

PointCloud read_xyz(const std::string& path) {
  LineScanner sc(path);
  PointCloud cloud;
  int arity = 0;  // 3 = plain, 6 = with rgb; fixed by the first data line
  while (sc.next_data(true)) {
    const auto& t = sc.tokens();
    if (arity == 0) {
      if (t.size() != 3 && t.size() != 6)
        sc.fail("expected 3 coordinates or 3 coordinates + rgb, got " +
                std::to_string(t.size()) + " values");
      arity = static_cast<int>(t.size());
    } else if (static_cast<int>(t.size()) != arity) {
      sc.fail("expected " + std::to_string(arity) + " values per line, got " +
              std::to_string(t.size()));
    }
    cloud.points.push_back(Vec3{sc.number(t[0], "x coordinate"),
                                sc.number(t[1], "y coordinate"),
                                sc.number(t[2], "z coordinate")});
    if (arity == 6)
      cloud.colors.push_back(Rgb{static_cast<float>(sc.number(t[3], "red value")),
                                 static_cast<float>(sc.number(t[4], "green value")),
                                 static_cast<float>(sc.number(t[5], "blue value"))});
  }
  return cloud;
}

PointCloud read_off(const std::string& path) {
  LineScanner sc(path);
  if (!sc.next_data(true)) sc.fail_missing("expected OFF header");
  auto header = sc.tokens();

  // Accept the counts on the header line, including the glued "OFF490 ..."
  // variant found in the wild.
  std::vector<std::string_view> counts;
  if (header[0] == "OFF") {
    if (header.size() == 1) {
      if (!sc.next_data(true)) sc.fail_missing("expected vertex/face/edge counts");
      counts = sc.tokens();
    } else {
      counts.assign(header.begin() + 1, header.end());
    }
  } else if (header[0].size() > 3 && header[0].substr(0, 3) == "OFF") {
    counts.push_back(header[0].substr(3));
    counts.insert(counts.end(), header.begin() + 1, header.end());
  } else {
    sc.fail("expected OFF header, got '" + std::string(header[0]) + "'");
  }
  if (counts.size() != 3)
    sc.fail("expected 3 counts (vertices faces edges), got " +
            std::to_string(counts.size()));
  const long nv = sc.integer(counts[0], "vertex count");
  const long nf = sc.integer(counts[1], "face count");
  sc.integer(counts[2], "edge count");
  if (nv < 0 || nf < 0) sc.fail("counts must be non-negative");

  PointCloud cloud;
  cloud.points.reserve(static_cast<size_t>(nv));
  for (long i = 0; i < nv; ++i) {
    if (!sc.next_data(true))
      sc.fail_missing("expected vertex " + std::to_string(i + 1) + " of " +
                      std::to_string(nv));
    const auto& t = sc.tokens();
    if (t.size() != 3)
      sc.fail("expected 3 vertex coordinates, got " + std::to_string(t.size()));
    cloud.points.push_back(Vec3{sc.number(t[0], "x coordinate"),
                                sc.number(t[1], "y coordinate"),
                                sc.number(t[2], "z coordinate")});
  }
  for (long i = 0; i < nf; ++i) {
    if (!sc.next_data(true))
      sc.fail_missing("expected face " + std::to_string(i + 1) + " of " +
                      std::to_string(nf));
  }
  if (sc.next_data(true)) sc.fail("unexpected content after faces");
  return cloud;
}

namespace {

struct PlyProperty {
  std::string type;
  std::string name;
};

struct PlyElement {
  std::string name;
  long count = 0;
  std::vector<PlyProperty> properties;
  bool has_list = false;
};

}  // namespace

PointCloud read_ply_ascii(const std::string& path) {
  LineScanner sc(path);
  if (!sc.next_data(false)) sc.fail_missing("expected ply magic");
  if (sc.tokens().size() != 1 || sc.tokens()[0] != "ply")
    sc.fail("expected ply magic");

  std::vector<PlyElement> elements;
  bool format_seen = false;
  for (;;) {
    if (!sc.next_data(false)) sc.fail_missing("expected end_header");
    const auto& t = sc.tokens();
    if (t[0] == "end_header") break;
    if (t[0] == "comment" || t[0] == "obj_info") continue;
    if (t[0] == "format") {
      if (t.size() != 3) sc.fail("malformed format line");
      if (t[1] != "ascii")
        sc.fail("only ascii 1.0 supported, got '" + std::string(t[1]) + "'");
      if (t[2] != "1.0")
        sc.fail("only ascii 1.0 supported, got version '" + std::string(t[2]) + "'");
      format_seen = true;
      continue;
    }
    if (t[0] == "element") {
      if (t.size() != 3) sc.fail("malformed element line");
      PlyElement el;
      el.name = std::string(t[1]);
      el.count = sc.integer(t[2], "element count");
      if (el.count < 0) sc.fail("element count must be non-negative");
      elements.push_back(el);
      continue;
    }
    if (t[0] == "property") {
      if (elements.empty()) sc.fail("property before any element");
      PlyElement& el = elements.back();
      if (t.size() >= 2 && t[1] == "list") {
        if (el.name == "vertex") sc.fail("list property not supported for vertices");
        el.has_list = true;
        continue;
      }
      if (t.size() != 3) sc.fail("malformed property line");
      el.properties.push_back({std::string(t[1]), std::string(t[2])});
      continue;
    }
    sc.fail("unknown header keyword '" + std::string(t[0]) + "'");
  }
  if (!format_seen) sc.fail("missing format line");

  const PlyElement* vertex = nullptr;
  for (const auto& el : elements)
    if (el.name == "vertex") vertex = &el;
  if (!vertex) sc.fail("missing vertex element");

  auto property_index = [&](const char* name) {
    for (size_t i = 0; i < vertex->properties.size(); ++i)
      if (vertex->properties[i].name == name) return static_cast<int>(i);
    return -1;
  };
  const int ix = property_index("x"), iy = property_index("y"), iz = property_index("z");
  if (ix < 0 || iy < 0 || iz < 0) sc.fail("vertex element is missing x/y/z properties");
  const int ir = property_index("red"), ig = property_index("green"), ib = property_index("blue");
  const bool has_color = ir >= 0 && ig >= 0 && ib >= 0;
  auto color_scale = [&](int prop) {
    const std::string& type = vertex->properties[static_cast<size_t>(prop)].type;
    return (type == "uchar" || type == "uint8") ? 1.0 / 255.0 : 1.0;
  };

  PointCloud cloud;
  for (const auto& el : elements) {
    if (&el == vertex) {
      cloud.points.reserve(static_cast<size_t>(el.count));
      for (long i = 0; i < el.count; ++i) {
        if (!sc.next_data(false))
          sc.fail_missing("expected vertex " + std::to_string(i + 1) + " of " +
                          std::to_string(el.count));
        const auto& t = sc.tokens();
        if (t.size() != el.properties.size())
          sc.fail("expected " + std::to_string(el.properties.size()) +
                  " vertex values, got " + std::to_string(t.size()));
        cloud.points.push_back(
            Vec3{sc.number(t[static_cast<size_t>(ix)], "x coordinate"),
                 sc.number(t[static_cast<size_t>(iy)], "y coordinate"),
                 sc.number(t[static_cast<size_t>(iz)], "z coordinate")});
        if (has_color)
          cloud.colors.push_back(Rgb{
              static_cast<float>(sc.number(t[static_cast<size_t>(ir)], "red value") *
                                 color_scale(ir)),
              static_cast<float>(sc.number(t[static_cast<size_t>(ig)], "green value") *
                                 color_scale(ig)),
              static_cast<float>(sc.number(t[static_cast<size_t>(ib)], "blue value") *
                                 color_scale(ib))});
      }
    } else {
      for (long i = 0; i < el.count; ++i) {
        if (!sc.next_data(false))
          sc.fail_missing("expected " + el.name + " " + std::to_string(i + 1) +
                          " of " + std::to_string(el.count));
      }
    }
  }
  if (sc.next_data(false)) sc.fail("unexpected content after declared elements");
  return cloud;
}

PointCloud read_point_cloud(const std::string& path) {
  std::string ext;
  const size_t dot = path.find_last_of('.');
  if (dot != std::string::npos) {
    ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  }
  if (ext == "xyz") return read_xyz(path);
  if (ext == "off") return read_off(path);
  if (ext == "ply") return read_ply_ascii(path);
  throw Error(ErrorKind::InvalidArgument,
              "cannot infer cloud format from '" + path + "' (use .xyz/.off/.ply)");
}

void write_xyz(const PointCloud& cloud, const std::string& path) {
  if (cloud.has_colors() && cloud.colors.size() != cloud.points.size())
    throw Error(ErrorKind::InvalidArgument, "color count does not match point count");
  std::string out;
  out.reserve(cloud.size() * 60);
  for (size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    append_g(out, p.x, 17);
    out += ' ';
    append_g(out, p.y, 17);
    out += ' ';
    append_g(out, p.z, 17);
    if (cloud.has_colors()) {
      for (float c : cloud.colors[i]) {
        out += ' ';
        append_g(out, static_cast<double>(c), 9);
      }
    }
    out += '\n';
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  f << out;
  f.flush();
  if (!f) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
}

void write_odf(const OdfField& field, const std::string& path) {
  if (field.point_count < 1)
    throw Error(ErrorKind::InvalidArgument, "refusing to write field with no points");
  if (field.direction_count < 1 || field.scale_count < 1)
    throw Error(ErrorKind::InvalidArgument, "field has an empty cone axis");
  const size_t expected = static_cast<size_t>(field.point_count) *
                          static_cast<size_t>(field.direction_count) *
                          static_cast<size_t>(field.scale_count);
  if (field.values.size() != expected)
    throw Error(ErrorKind::InvalidArgument, "field value count does not match header");

  std::vector<uint8_t> bytes;
  bytes.reserve(24 + 4 * expected);
  bytes.insert(bytes.end(), {'O', 'D', 'F', '1'});
  put_u32(bytes, 1);
  put_u32(bytes, static_cast<uint32_t>(field.point_count));
  put_u32(bytes, static_cast<uint32_t>(field.direction_count));
  put_u32(bytes, static_cast<uint32_t>(field.scale_count));
  bytes.push_back(static_cast<uint8_t>(field.align));
  bytes.insert(bytes.end(), {0, 0, 0});
  for (float v : field.values) put_f32(bytes, v);
  write_file_bytes(path, bytes);
}

OdfField read_odf(const std::string& path) {
  ByteReader r(path, read_file_bytes(path));
  auto fail_at = [&](size_t offset, const std::string& message) -> void {
    throw Error(ErrorKind::Parse,
                path + ": offset " + std::to_string(offset) + ": " + message);
  };

  uint8_t magic[4];
  r.get_bytes(magic, 4, "magic");
  if (magic[0] != 'O' || magic[1] != 'D' || magic[2] != 'F' || magic[3] != '1')
    fail_at(0, "bad magic (expected ODF1)");
  size_t off = r.offset();
  const uint32_t version = r.get_u32("format version");
  if (version != 1) fail_at(off, "unsupported format version " + std::to_string(version));

  OdfField field;
  off = r.offset();
  field.point_count = static_cast<int>(r.get_u32("point count"));
  if (field.point_count < 1) fail_at(off, "point count must be at least 1");
  off = r.offset();
  field.direction_count = static_cast<int>(r.get_u32("direction count"));
  if (field.direction_count < 1) fail_at(off, "direction count must be at least 1");
  off = r.offset();
  field.scale_count = static_cast<int>(r.get_u32("scale count"));
  if (field.scale_count < 1) fail_at(off, "scale count must be at least 1");

  off = r.offset();
  const uint8_t align = r.get_u8("alignment mode");
  if (align > 2) fail_at(off, "bad alignment mode " + std::to_string(align));
  field.align = static_cast<AlignMode>(align);
  for (int i = 0; i < 3; ++i) {
    off = r.offset();
    if (r.get_u8("reserved byte") != 0) fail_at(off, "reserved bytes must be zero");
  }

  const uint64_t count = static_cast<uint64_t>(field.point_count) *
                         static_cast<uint64_t>(field.direction_count) *
                         static_cast<uint64_t>(field.scale_count);
  if (r.remaining() != 4 * count)
    r.fail("payload is " + std::to_string(r.remaining()) + " bytes, header implies " +
           std::to_string(4 * count));
  field.values.reserve(count);
  for (uint64_t i = 0; i < count; ++i) field.values.push_back(r.get_f32("value"));
  r.expect_end();
  return field;
}

namespace {

Vec3 random_unit_vector(SplitMix64& rng) {
  for (;;) {
    const Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    const double n = v.norm();
    if (n > 1e-6) return v / n;
  }
}

// Sphere shell sampled as antipodal pairs sharing one radius, so the centroid
// is exactly zero and unit normalization is a pure rescale: every point norm
// then lies within [1-4*sigma, 1] for the clamped jitter below.
void sphere_points(PointCloud& cloud, int n, double sigma, SplitMix64& rng) {
  while (static_cast<int>(cloud.size()) + 2 <= n) {
    const Vec3 dir = random_unit_vector(rng);
    const double r = 1.0 + std::clamp(rng.normal() * sigma, -2.0 * sigma, 2.0 * sigma);
    const Vec3 p = dir * r;
    cloud.points.push_back(p);
    cloud.points.push_back(Vec3{-p.x, -p.y, -p.z});
  }
  if (static_cast<int>(cloud.size()) < n) {
    const Vec3 dir = random_unit_vector(rng);
    const double r = 1.0 + std::clamp(rng.normal() * sigma, -2.0 * sigma, 2.0 * sigma);
    cloud.points.push_back(dir * r);
  }
}

void box_points(PointCloud& cloud, int n, double sigma, SplitMix64& rng) {
  constexpr double hx = 0.9, hy = 0.6, hz = 0.4;
  constexpr double ax = hy * hz, ay = hx * hz, az = hx * hy;
  constexpr double faces[6] = {ax, ax, ay, ay, az, az};
  constexpr double total = 2.0 * (ax + ay + az);
  for (int i = 0; i < n; ++i) {
    const double u = rng.next_double() * total;
    int face = 0;
    double acc = faces[0];
    while (face < 5 && u >= acc) acc += faces[++face];
    const double u1 = rng.uniform(-1.0, 1.0);
    const double u2 = rng.uniform(-1.0, 1.0);
    Vec3 p;
    switch (face) {
      case 0: p = Vec3{hx, u1 * hy, u2 * hz}; break;
      case 1: p = Vec3{-hx, u1 * hy, u2 * hz}; break;
      case 2: p = Vec3{u1 * hx, hy, u2 * hz}; break;
      case 3: p = Vec3{u1 * hx, -hy, u2 * hz}; break;
      case 4: p = Vec3{u1 * hx, u2 * hy, hz}; break;
      default: p = Vec3{u1 * hx, u2 * hy, -hz}; break;
    }
    p.x += rng.normal() * sigma;
    p.y += rng.normal() * sigma;
    p.z += rng.normal() * sigma;
    cloud.points.push_back(p);
  }
}

// Two half-planes meeting at a right angle along the y axis.
void corner_points(PointCloud& cloud, int n, double sigma, SplitMix64& rng) {
  for (int i = 0; i < n; ++i) {
    const double u1 = rng.next_double() * 1.2;
    const double u2 = rng.uniform(-1.0, 1.0);
    Vec3 p = (i % 2 == 0) ? Vec3{u1, u2, 0.0} : Vec3{0.0, u2, u1};
    p.x += rng.normal() * sigma;
    p.y += rng.normal() * sigma;
    p.z += rng.normal() * sigma;
    cloud.points.push_back(p);
  }
}

void cylinder_points(PointCloud& cloud, int n, double sigma, SplitMix64& rng) {
  constexpr double radius = 0.5;
  for (int i = 0; i < n; ++i) {
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi_v<double>);
    const double z = rng.uniform(-1.0, 1.0);
    Vec3 p{radius * std::cos(theta), radius * std::sin(theta), z};
    p.x += rng.normal() * sigma;
    p.y += rng.normal() * sigma;
    p.z += rng.normal() * sigma;
    cloud.points.push_back(p);
  }
}

}  // namespace

Dataset generate_synthetic_dataset(const SyntheticSpec& spec) {
  if (spec.samples_per_class < 1)
    throw Error(ErrorKind::InvalidArgument, "samples per class must be positive");
  if (spec.points_per_cloud < 2)
    throw Error(ErrorKind::InvalidArgument, "points per cloud must be at least 2");
  if (spec.sigma < 0.0)
    throw Error(ErrorKind::InvalidArgument, "noise sigma must be non-negative");

  Dataset data;
  data.class_names = {"sphere", "box", "corner", "cylinder"};
  data.clouds.reserve(static_cast<size_t>(spec.samples_per_class) * 4);
  for (int cls = 0; cls < 4; ++cls) {
    for (int s = 0; s < spec.samples_per_class; ++s) {
      const uint64_t stream = static_cast<uint64_t>(cls) *
                                  static_cast<uint64_t>(spec.samples_per_class) +
                              static_cast<uint64_t>(s);
      SplitMix64 rng(derive_seed(spec.seed, stream));
      PointCloud cloud;
      cloud.points.reserve(static_cast<size_t>(spec.points_per_cloud));
      switch (cls) {
        case 0: sphere_points(cloud, spec.points_per_cloud, spec.sigma, rng); break;
        case 1: box_points(cloud, spec.points_per_cloud, spec.sigma, rng); break;
        case 2: corner_points(cloud, spec.points_per_cloud, spec.sigma, rng); break;
        default: cylinder_points(cloud, spec.points_per_cloud, spec.sigma, rng); break;
      }
      cloud.label = cls;
      cloud = normalize_to_unit_sphere(cloud);
      data.clouds.push_back(std::move(cloud));
    }
  }
  return data;
}

void split_dataset(const Dataset& all, Dataset* train, Dataset* test) {
  if (!train || !test)
    throw Error(ErrorKind::InvalidArgument, "split_dataset: null output");
  train->clouds.clear();
  test->clouds.clear();
  train->class_names = all.class_names;
  test->class_names = all.class_names;
  for (int cls = 0; cls < all.class_count(); ++cls) {
    std::vector<size_t> members;
    for (size_t i = 0; i < all.clouds.size(); ++i)
      if (all.clouds[i].label == cls) members.push_back(i);
    const size_t test_count = members.size() / 5;
    const size_t train_count = members.size() - test_count;
    for (size_t j = 0; j < members.size(); ++j) {
      Dataset* dst = j < train_count ? train : test;
      dst->clouds.push_back(all.clouds[members[j]]);
    }
  }
}

Dataset load_dataset_directory(const std::string& path) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(path, ec))
    throw Error(ErrorKind::Io, "'" + path + "' is not a directory");

  std::vector<std::string> class_dirs;
  for (const auto& entry : fs::directory_iterator(path))
    if (entry.is_directory()) class_dirs.push_back(entry.path().filename().string());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty())
    throw Error(ErrorKind::InvalidArgument,
                "'" + path + "' has no class subdirectories");

  Dataset data;
  data.class_names = class_dirs;
  for (int cls = 0; cls < static_cast<int>(class_dirs.size()); ++cls) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(fs::path(path) / class_dirs[static_cast<size_t>(cls)])) {
      if (!entry.is_regular_file()) continue;
      std::string ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      if (ext == ".xyz" || ext == ".off" || ext == ".ply")
        files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      PointCloud cloud = normalize_to_unit_sphere(read_point_cloud(file));
      cloud.label = cls;
      data.clouds.push_back(std::move(cloud));
    }
  }
  if (data.clouds.empty())
    throw Error(ErrorKind::InvalidArgument, "'" + path + "' contains no cloud files");
  return data;
}

void export_glyphs(const PointCloud& cloud, const OdfField& field,
                   const DirectionSet& directions,
                   const std::vector<int>& selection, const std::string& path,
                   double glyph_scale) {
  if (field.point_count != static_cast<int>(cloud.size()))
    throw Error(ErrorKind::InvalidArgument, "field does not match cloud size");
  if (field.direction_count != static_cast<int>(directions.directions.size()))
    throw Error(ErrorKind::InvalidArgument, "field does not match direction set");
  if (!(glyph_scale > 0.0))
    throw Error(ErrorKind::InvalidArgument, "glyph scale must be positive");
  for (int i : selection)
    if (i < 0 || i >= field.point_count)
      throw Error(ErrorKind::InvalidArgument,
                  "selection index " + std::to_string(i) + " out of range");

  std::vector<Frame> frames;
  if (field.align != AlignMode::None) {
    const KnnIndex index(cloud);
    frames = alignment_frames(field.align, cloud, index);
  }

  std::string out;
  out += "# ODF glyphs: per selected point, one line segment per cone direction\n";
  out += "# segment length = glyph_scale * value / point_max, value = max over scales\n";
  out += "# glyph_scale ";
  append_g(out, glyph_scale, 9);
  out += "\n";

  int vertex_count = 0;
  auto emit_vertex = [&](const Vec3& v) {
    out += "v ";
    append_g(out, v.x, 9);
    out += ' ';
    append_g(out, v.y, 9);
    out += ' ';
    append_g(out, v.z, 9);
    out += '\n';
    return ++vertex_count;
  };

  for (int i : selection) {
    std::vector<double> strength(static_cast<size_t>(field.direction_count), 0.0);
    double point_max = 0.0;
    for (int l = 0; l < field.direction_count; ++l) {
      double best = 0.0;
      for (int s = 0; s < field.scale_count; ++s)
        best = std::max(best, static_cast<double>(field.at(i, l, s)));
      strength[static_cast<size_t>(l)] = best;
      point_max = std::max(point_max, best);
    }
    out += "# point " + std::to_string(i) + " max ";
    append_g(out, point_max, 9);
    out += '\n';
    if (point_max <= 0.0) continue;

    const Vec3& p = cloud.points[static_cast<size_t>(i)];
    const int base = emit_vertex(p);
    for (int l = 0; l < field.direction_count; ++l) {
      const double value = strength[static_cast<size_t>(l)];
      if (value <= 0.0) continue;
      Vec3 dir = directions.directions[static_cast<size_t>(l)];
      // Frames rotate offsets into canonical coordinates; the cone axis seen
      // in world space is the inverse rotation of the canonical direction.
      if (!frames.empty()) dir = frames[static_cast<size_t>(i)].rotation.transposed_mul(dir);
      const int tip = emit_vertex(p + dir * (glyph_scale * value / point_max));
      out += "l " + std::to_string(base) + " " + std::to_string(tip) + "\n";
    }
  }

  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  f << out;
  f.flush();
  if (!f) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
}

}  // namespace odfnet
