#include <unistd.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "odfnet/bytes.hpp"
#include "odfnet/error.hpp"
#include "odfnet/io.hpp"
#include "odfnet/rng.hpp"

using namespace odfnet;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test case, removed on destruction.
struct TempDir {
  fs::path dir;
  TempDir() {
    static int counter = 0;
    dir = fs::temp_directory_path() /
          ("odfnet_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(dir);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string file(const std::string& name) const { return (dir / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  f << text;
}

// Checks both the error kind and that the message carries a position.
template <typename Fn>
std::string capture_parse_error(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
    return e.what();
  }
  FAIL("expected a parse error");
  return {};
}

bool same_bits(double a, double b) {
  return std::bit_cast<uint64_t>(a) == std::bit_cast<uint64_t>(b);
}

PointCloud random_cloud(uint64_t seed, int n) {
  SplitMix64 rng(seed);
  PointCloud cloud;
  for (int i = 0; i < n; ++i)
    cloud.points.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                            rng.uniform(-1.0, 1.0)});
  return cloud;
}

}  // namespace

TEST_CASE("xyz round trip reproduces every double bit for bit") {
  TempDir tmp;
  PointCloud cloud = random_cloud(17, 60);
  cloud.points.push_back({0.1, 1.0 / 3.0, 3.141592653589793});
  cloud.points.push_back({1e-300, -1e300, 4.9406564584124654e-324});
  cloud.points.push_back({-0.0, 0.0, 123456789.123456789});
  const std::string path = tmp.file("cloud.xyz");
  write_xyz(cloud, path);
  const PointCloud back = read_xyz(path);
  REQUIRE(back.size() == cloud.size());
  for (size_t i = 0; i < cloud.size(); ++i) {
    INFO("point ", i);
    CHECK(same_bits(back.points[i].x, cloud.points[i].x));
    CHECK(same_bits(back.points[i].y, cloud.points[i].y));
    CHECK(same_bits(back.points[i].z, cloud.points[i].z));
  }
  CHECK_FALSE(back.has_colors());
}

TEST_CASE("xyz carries rgb columns through a round trip") {
  TempDir tmp;
  PointCloud cloud = random_cloud(4, 10);
  SplitMix64 rng(5);
  for (size_t i = 0; i < cloud.size(); ++i)
    cloud.colors.push_back({static_cast<float>(rng.next_double()),
                            static_cast<float>(rng.next_double()),
                            static_cast<float>(rng.next_double())});
  const std::string path = tmp.file("colored.xyz");
  write_xyz(cloud, path);
  const PointCloud back = read_xyz(path);
  REQUIRE(back.has_colors());
  REQUIRE(back.colors.size() == cloud.colors.size());
  for (size_t i = 0; i < cloud.size(); ++i)
    for (int c = 0; c < 3; ++c) CHECK(back.colors[i][static_cast<size_t>(c)] ==
                                      cloud.colors[i][static_cast<size_t>(c)]);
}

TEST_CASE("xyz reader skips comments and flags malformed lines by number") {
  TempDir tmp;
  const std::string path = tmp.file("in.xyz");

  write_text(path, "# header comment\n\n1 2 3\n 4 5 6 # trailing note\n");
  const PointCloud ok = read_xyz(path);
  REQUIRE(ok.size() == 2);
  CHECK(ok.points[1].y == 5.0);

  write_text(path, "1 2 3 4\n");
  std::string msg = capture_parse_error([&] { read_xyz(path); });
  CHECK(msg.find(":1:") != std::string::npos);

  write_text(path, "1 2 3\n4 5\n");
  msg = capture_parse_error([&] { read_xyz(path); });
  CHECK(msg.find(":2:") != std::string::npos);

  write_text(path, "1 2 3\n4 five 6\n");
  msg = capture_parse_error([&] { read_xyz(path); });
  CHECK(msg.find(":2:") != std::string::npos);
  CHECK(msg.find("five") != std::string::npos);

  CHECK_THROWS_AS(read_xyz(tmp.file("missing.xyz")), Error);
}

TEST_CASE("off reader accepts the usual header spellings") {
  TempDir tmp;
  const std::string path = tmp.file("mesh.off");
  const std::string body = "0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";

  write_text(path, "OFF\n3 1 0\n" + body);
  CHECK(read_off(path).size() == 3);

  write_text(path, "OFF 3 1 0\n" + body);
  CHECK(read_off(path).size() == 3);

  write_text(path, "OFF3 1 0\n" + body);
  const PointCloud glued = read_off(path);
  REQUIRE(glued.size() == 3);
  CHECK(glued.points[2].y == 1.0);

  write_text(path, "# comment first\nOFF\n3 1 0\n" + body);
  CHECK(read_off(path).size() == 3);
}

TEST_CASE("off reader rejects malformed files with positions") {
  TempDir tmp;
  const std::string path = tmp.file("bad.off");

  write_text(path, "PLY\n3 0 0\n");
  std::string msg = capture_parse_error([&] { read_off(path); });
  CHECK(msg.find(":1:") != std::string::npos);

  write_text(path, "OFF\n3 0\n");
  capture_parse_error([&] { read_off(path); });

  write_text(path, "OFF\n-1 0 0\n");
  capture_parse_error([&] { read_off(path); });

  write_text(path, "OFF\n3 0 0\n0 0 0\n1 0 0\n");
  msg = capture_parse_error([&] { read_off(path); });
  CHECK(msg.find(":5:") != std::string::npos);
  CHECK(msg.find("vertex 3 of 3") != std::string::npos);

  write_text(path, "OFF\n2 1 0\n0 0 0\n1 0 0\n");
  msg = capture_parse_error([&] { read_off(path); });
  CHECK(msg.find("face 1 of 1") != std::string::npos);

  write_text(path, "OFF\n2 0 0\n0 0 0\n1 0 0\nextra\n");
  msg = capture_parse_error([&] { read_off(path); });
  CHECK(msg.find(":5:") != std::string::npos);

  write_text(path, "OFF\n2 0 0\n0 0 zero\n1 0 0\n");
  msg = capture_parse_error([&] { read_off(path); });
  CHECK(msg.find(":3:") != std::string::npos);
}

TEST_CASE("ply reader handles properties, colors, and skipped elements") {
  TempDir tmp;
  const std::string path = tmp.file("mesh.ply");

  write_text(path,
             "ply\nformat ascii 1.0\ncomment made by hand\n"
             "element vertex 2\n"
             "property float x\nproperty float y\nproperty float z\n"
             "property uchar red\nproperty uchar green\nproperty uchar blue\n"
             "element face 1\nproperty list uchar int vertex_indices\n"
             "end_header\n"
             "0 0 0 255 0 0\n"
             "1 2 3 0 128 255\n"
             "3 0 1 0\n");
  const PointCloud cloud = read_ply_ascii(path);
  REQUIRE(cloud.size() == 2);
  REQUIRE(cloud.has_colors());
  CHECK(cloud.points[1].z == 3.0);
  CHECK(cloud.colors[0][0] == doctest::Approx(1.0));
  CHECK(cloud.colors[1][1] == doctest::Approx(128.0 / 255.0));

  // Float colors pass through unscaled, extra scalar properties are ignored.
  write_text(path,
             "ply\nformat ascii 1.0\n"
             "element vertex 1\n"
             "property float x\nproperty float y\nproperty float z\n"
             "property float nx\nproperty float red\nproperty float green\n"
             "property float blue\n"
             "end_header\n"
             "4 5 6 0.5 0.25 0.5 1.0\n");
    const PointCloud floats = read_ply_ascii(path);
  REQUIRE(floats.size() == 1);
  CHECK(floats.colors[0][0] == doctest::Approx(0.25));
}

TEST_CASE("ply reader rejects malformed files") {
  TempDir tmp;
  const std::string path = tmp.file("bad.ply");

  write_text(path, "plyx\n");
  capture_parse_error([&] { read_ply_ascii(path); });

  write_text(path, "ply\nformat binary_little_endian 1.0\nend_header\n");
  std::string msg = capture_parse_error([&] { read_ply_ascii(path); });
  CHECK(msg.find("ascii") != std::string::npos);

  write_text(path, "ply\nelement vertex 0\nend_header\n");
  msg = capture_parse_error([&] { read_ply_ascii(path); });
  CHECK(msg.find("format") != std::string::npos);

  write_text(path,
             "ply\nformat ascii 1.0\nelement vertex 1\n"
             "property float x\nproperty float y\nend_header\n0 0\n");
  msg = capture_parse_error([&] { read_ply_ascii(path); });
  CHECK(msg.find("x/y/z") != std::string::npos);

  write_text(path,
             "ply\nformat ascii 1.0\nelement vertex 2\n"
             "property float x\nproperty float y\nproperty float z\n"
             "end_header\n0 0 0\n");
  msg = capture_parse_error([&] { read_ply_ascii(path); });
  CHECK(msg.find("vertex 2 of 2") != std::string::npos);

  write_text(path,
             "ply\nformat ascii 1.0\nelement vertex 1\n"
             "property float x\nproperty float y\nproperty float z\n"
             "end_header\n0 0 0 9\n");
  msg = capture_parse_error([&] { read_ply_ascii(path); });
  CHECK(msg.find(":8:") != std::string::npos);
  CHECK(msg.find("got 4") != std::string::npos);

  write_text(path,
             "ply\nformat ascii 1.0\nelement vertex 1\n"
             "property float x\nproperty float y\nproperty float z\n"
             "end_header\n0 0 0\ntrailing\n");
  capture_parse_error([&] { read_ply_ascii(path); });
}

TEST_CASE("extension dispatch is case insensitive and rejects unknowns") {
  TempDir tmp;
  write_text(tmp.file("UP.XYZ"), "1 2 3\n");
  CHECK(read_point_cloud(tmp.file("UP.XYZ")).size() == 1);
  try {
    read_point_cloud(tmp.file("cloud.csv"));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidArgument);
  }
}

TEST_CASE("odf binary round trips byte for byte") {
  TempDir tmp;
  const PointCloud cloud = random_cloud(9, 12);
  const ConeBank bank = make_cone_bank(0, {2, 4}, {0.6, 1.2});
  const OdfField field = compute_odf_field(cloud, bank, AlignMode::RiXY);

  const std::string path = tmp.file("field.odf");
  write_odf(field, path);
  const std::vector<uint8_t> bytes = read_file_bytes(path);

  REQUIRE(bytes.size() == 24 + 4 * field.value_count());
  CHECK(bytes[0] == 'O');
  CHECK(bytes[1] == 'D');
  CHECK(bytes[2] == 'F');
  CHECK(bytes[3] == '1');
  CHECK(bytes[4] == 1);  // version, little-endian u32
  CHECK(bytes[5] == 0);
  CHECK(bytes[8] == 12);  // point count
  CHECK(bytes[12] == 12);  // direction count
  CHECK(bytes[16] == 4);  // scale count
  CHECK(bytes[20] == 1);  // alignment mode
  CHECK(bytes[21] == 0);
  CHECK(bytes[22] == 0);
  CHECK(bytes[23] == 0);

  const OdfField back = read_odf(path);
  CHECK(back.point_count == field.point_count);
  CHECK(back.direction_count == field.direction_count);
  CHECK(back.scale_count == field.scale_count);
  CHECK(back.align == field.align);
  REQUIRE(back.values.size() == field.values.size());
  for (size_t i = 0; i < field.values.size(); ++i)
    CHECK(std::bit_cast<uint32_t>(back.values[i]) ==
          std::bit_cast<uint32_t>(field.values[i]));

  const std::string path2 = tmp.file("field2.odf");
  write_odf(back, path2);
  CHECK(read_file_bytes(path2) == bytes);
}

TEST_CASE("odf reader rejects a hundred broken variants with offsets") {
  TempDir tmp;
  const PointCloud cloud = random_cloud(13, 8);
  const ConeBank bank = make_cone_bank(0, {1, 3}, {0.7});
  const OdfField field = compute_odf_field(cloud, bank);
  const std::string good_path = tmp.file("good.odf");
  write_odf(field, good_path);
  const std::vector<uint8_t> good = read_file_bytes(good_path);

  const std::string bad_path = tmp.file("bad.odf");
  int cases = 0;
  auto expect_reject = [&](const std::vector<uint8_t>& bytes) {
    write_file_bytes(bad_path, bytes);
    const std::string msg = capture_parse_error([&] { read_odf(bad_path); });
    CHECK(msg.find(bad_path) != std::string::npos);
    CHECK(msg.find("offset ") != std::string::npos);
    ++cases;
  };

  // Truncations at every header boundary and across the payload.
  for (size_t len : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 11u, 12u, 15u, 16u, 19u, 20u,
                     21u, 22u, 23u})
    expect_reject(std::vector<uint8_t>(good.begin(), good.begin() + len));
  for (size_t cut = 24; cut < good.size(); cut += 7)
    expect_reject(std::vector<uint8_t>(good.begin(), good.begin() + cut));

  // Magic corruption, byte by byte.
  for (size_t i = 0; i < 4; ++i) {
    std::vector<uint8_t> bytes = good;
    bytes[i] ^= 0x20;
    expect_reject(bytes);
  }

  // Header field corruption: version, zero counts, alignment, reserved bytes.
  {
    std::vector<uint8_t> bytes = good;
    bytes[4] = 2;
    expect_reject(bytes);
  }
  for (size_t field_off : {8u, 12u, 16u}) {
    std::vector<uint8_t> bytes = good;
    for (int i = 0; i < 4; ++i) bytes[field_off + static_cast<size_t>(i)] = 0;
    expect_reject(bytes);
  }
  {
    std::vector<uint8_t> bytes = good;
    bytes[20] = 3;
    expect_reject(bytes);
    bytes[20] = 255;
    expect_reject(bytes);
  }
  for (size_t off : {21u, 22u, 23u}) {
    std::vector<uint8_t> bytes = good;
    bytes[off] = 1;
    expect_reject(bytes);
  }

  // Payload length disagreements: extra bytes, and a header that promises
  // more points than the payload carries.
  {
    std::vector<uint8_t> bytes = good;
    bytes.insert(bytes.end(), {0, 0, 0, 0});
    expect_reject(bytes);
    bytes = good;
    bytes.push_back(0);
    expect_reject(bytes);
    bytes = good;
    bytes[8] = static_cast<uint8_t>(bytes[8] + 1);
    expect_reject(bytes);
  }

  CHECK(cases >= 100);
  CHECK(read_odf(good_path).values.size() == field.value_count());
}

TEST_CASE("field writer refuses inconsistent shapes") {
  TempDir tmp;
  OdfField field;
  CHECK_THROWS_AS(write_odf(field, tmp.file("x.odf")), Error);
  field.point_count = 2;
  field.direction_count = 3;
  field.scale_count = 1;
  field.values = {1.0f, 2.0f};
  CHECK_THROWS_AS(write_odf(field, tmp.file("x.odf")), Error);
}

TEST_CASE("synthetic dataset is deterministic with the documented classes") {
  SyntheticSpec spec;
  spec.samples_per_class = 3;
  spec.points_per_cloud = 64;
  const Dataset data = generate_synthetic_dataset(spec);
  CHECK(data.class_names ==
        std::vector<std::string>{"sphere", "box", "corner", "cylinder"});
  REQUIRE(data.size() == 12);
  for (size_t i = 0; i < data.size(); ++i) {
    CHECK(data.clouds[i].label == static_cast<int>(i / 3));
    REQUIRE(data.clouds[i].size() == 64);
    double max_norm = 0.0;
    for (const Vec3& p : data.clouds[i].points) max_norm = std::max(max_norm, p.norm());
    CHECK(max_norm == doctest::Approx(1.0).epsilon(1e-12));
  }

  const Dataset again = generate_synthetic_dataset(spec);
  for (size_t i = 0; i < data.size(); ++i)
    for (size_t j = 0; j < 64; ++j) {
      CHECK(same_bits(data.clouds[i].points[j].x, again.clouds[i].points[j].x));
      CHECK(same_bits(data.clouds[i].points[j].z, again.clouds[i].points[j].z));
    }

  SyntheticSpec other = spec;
  other.seed = 30;
  const Dataset moved = generate_synthetic_dataset(other);
  CHECK(moved.clouds[0].points[0].x != data.clouds[0].points[0].x);

  CHECK_THROWS_AS(generate_synthetic_dataset({0, 64, 0.02, 1}), Error);
  CHECK_THROWS_AS(generate_synthetic_dataset({1, 1, 0.02, 1}), Error);
  CHECK_THROWS_AS(generate_synthetic_dataset({1, 64, -0.1, 1}), Error);
}

TEST_CASE("sphere samples come in antipodal pairs sharing a radius") {
  SyntheticSpec spec;
  spec.samples_per_class = 1;
  spec.points_per_cloud = 64;
  const Dataset data = generate_synthetic_dataset(spec);
  const PointCloud& sphere = data.clouds[0];
  for (size_t i = 0; i + 1 < sphere.size(); i += 2) {
    CHECK(same_bits(sphere.points[i].x, -sphere.points[i + 1].x));
    CHECK(same_bits(sphere.points[i].y, -sphere.points[i + 1].y));
    CHECK(same_bits(sphere.points[i].z, -sphere.points[i + 1].z));
  }
  for (const Vec3& p : sphere.points) {
    CHECK(p.norm() > 0.9);
    CHECK(p.norm() <= 1.0 + 1e-12);
  }
}

TEST_CASE("split keeps four of five samples per class for training") {
  SyntheticSpec spec;
  spec.samples_per_class = 10;
  spec.points_per_cloud = 48;
  const Dataset all = generate_synthetic_dataset(spec);
  Dataset train, test;
  split_dataset(all, &train, &test);
  CHECK(train.size() == 32);
  CHECK(test.size() == 8);
  CHECK(train.class_names == all.class_names);
  int train_per_class[4] = {0, 0, 0, 0};
  int test_per_class[4] = {0, 0, 0, 0};
  for (const auto& c : train.clouds) ++train_per_class[c.label];
  for (const auto& c : test.clouds) ++test_per_class[c.label];
  for (int cls = 0; cls < 4; ++cls) {
    CHECK(train_per_class[cls] == 8);
    CHECK(test_per_class[cls] == 2);
  }
  // Leading samples of each class train, trailing ones test.
  CHECK(same_bits(train.clouds[0].points[0].x, all.clouds[0].points[0].x));
  CHECK(same_bits(test.clouds[0].points[0].x, all.clouds[8].points[0].x));
  CHECK_THROWS_AS(split_dataset(all, nullptr, &test), Error);
}

TEST_CASE("directory datasets are ordered, labeled, and normalized") {
  TempDir tmp;
  fs::create_directories(tmp.dir / "beta");
  fs::create_directories(tmp.dir / "alpha");
  write_text((tmp.dir / "alpha" / "b.xyz").string(), "0 0 0\n4 0 0\n0 4 0\n");
  write_text((tmp.dir / "alpha" / "a.xyz").string(), "0 0 0\n2 0 0\n0 0 2\n");
  write_text((tmp.dir / "beta" / "m.off").string(), "OFF\n3 0 0\n0 0 0\n8 0 0\n0 8 0\n");
  write_text((tmp.dir / "beta" / "notes.txt").string(), "not a cloud\n");

  const Dataset data = load_dataset_directory(tmp.dir.string());
  CHECK(data.class_names == std::vector<std::string>{"alpha", "beta"});
  REQUIRE(data.size() == 3);
  CHECK(data.clouds[0].label == 0);
  CHECK(data.clouds[1].label == 0);
  CHECK(data.clouds[2].label == 1);
  for (const auto& cloud : data.clouds) {
    double max_norm = 0.0;
    for (const Vec3& p : cloud.points) max_norm = std::max(max_norm, p.norm());
    CHECK(max_norm == doctest::Approx(1.0).epsilon(1e-12));
  }
  // alpha/a.xyz sorts before alpha/b.xyz; its normalized third point keeps a
  // nonzero z while b's stays planar.
  CHECK(std::abs(data.clouds[0].points[2].z) > 0.5);
  CHECK(data.clouds[1].points[2].z == 0.0);

  CHECK_THROWS_AS(load_dataset_directory(tmp.file("nope")), Error);
  fs::create_directories(tmp.dir / "empty_root" );
  CHECK_THROWS_AS(load_dataset_directory((tmp.dir / "empty_root").string()), Error);
  fs::create_directories(tmp.dir / "empty_root" / "cls");
  CHECK_THROWS_AS(load_dataset_directory((tmp.dir / "empty_root").string()), Error);
}

TEST_CASE("glyph export writes one segment per nonzero direction") {
  TempDir tmp;
  PointCloud cloud;
  cloud.points = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  const DirectionSet dirs = icosphere_directions(0);

  OdfField field;
  field.point_count = 3;
  field.direction_count = 12;
  field.scale_count = 2;
  field.values.assign(3 * 12 * 2, 0.0f);
  field.values[0 * 24 + 5 * 2 + 0] = 0.25f;  // point 0, direction 5
  field.values[0 * 24 + 5 * 2 + 1] = 0.5f;
  field.values[0 * 24 + 9 * 2 + 0] = 1.0f;  // point 0, direction 9
  // point 1 stays all zero, point 2 unselected

  const std::string path = tmp.file("glyphs.obj");
  export_glyphs(cloud, field, dirs, {0, 1}, path, 0.2);

  std::ifstream in(path);
  std::string line;
  std::vector<Vec3> vertices;
  std::vector<std::pair<int, int>> segments;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      Vec3 v;
      ss >> v.x >> v.y >> v.z;
      vertices.push_back(v);
    } else if (tag == "l") {
      int a = 0, b = 0;
      ss >> a >> b;
      segments.emplace_back(a, b);
    }
  }
  // Base vertex plus two tips for point 0; the all-zero point emits nothing.
  REQUIRE(vertices.size() == 3);
  REQUIRE(segments.size() == 2);
  for (const auto& [a, b] : segments) {
    CHECK(a == 1);
    CHECK(b >= 2);
    CHECK(b <= 3);
  }
  // Direction 5 peaks at 0.5, direction 9 at 1.0; lengths scale accordingly.
  const double len1 = (vertices[1] - vertices[0]).norm();
  const double len2 = (vertices[2] - vertices[0]).norm();
  CHECK(len1 == doctest::Approx(0.2 * 0.5).epsilon(1e-6));
  CHECK(len2 == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(normalized(vertices[2] - vertices[0]).x ==
        doctest::Approx(dirs.directions[9].x).epsilon(1e-6));

  CHECK_THROWS_AS(export_glyphs(cloud, field, dirs, {3}, path, 0.2), Error);
  CHECK_THROWS_AS(export_glyphs(cloud, field, dirs, {0}, path, 0.0), Error);
  field.point_count = 2;
  CHECK_THROWS_AS(export_glyphs(cloud, field, dirs, {0}, path, 0.2), Error);
}
