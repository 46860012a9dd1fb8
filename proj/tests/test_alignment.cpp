#include <cmath>
#include <vector>

#include "doctest.h"
#include "odfnet/alignment.hpp"
#include "odfnet/geometry.hpp"
#include "odfnet/rng.hpp"

using namespace odfnet;

namespace {

constexpr double kPi = 3.14159265358979323846;

PointCloud random_cloud(uint64_t seed, int n) {
  SplitMix64 rng(seed);
  PointCloud cloud;
  for (int i = 0; i < n; ++i)
    cloud.points.push_back(
        {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
  return cloud;
}

Mat3 rotation_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Mat3::from_columns({1, 0, 0}, {0, c, s}, {0, -s, c});
}

// Generic rotation from Euler angles; independent of the library's samplers.
Mat3 euler_rotation(SplitMix64& rng) {
  return Mat3::rotation_z(rng.uniform(0.0, 2 * kPi)) *
         rotation_x(rng.uniform(0.0, kPi)) *
         Mat3::rotation_z(rng.uniform(0.0, 2 * kPi));
}

void require_orthonormal(const Mat3& r) {
  const Mat3 back = r * r.transposed();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      REQUIRE(std::abs(back.m[static_cast<size_t>(i * 3 + j)] - (i == j ? 1.0 : 0.0)) <
              1e-12);
  REQUIRE(std::abs(r.determinant() - 1.0) < 1e-12);
}

}  // namespace

TEST_CASE("alignment mode names round trip") {
  for (AlignMode mode : {AlignMode::None, AlignMode::RiXY, AlignMode::RiXYZ})
    REQUIRE(align_mode_from_string(align_mode_name(mode)) == mode);
  REQUIRE_THROWS_AS(align_mode_from_string("sideways"), Error);
}

TEST_CASE("azimuth pivot is a pure rotation about z") {
  const PointCloud cloud = random_cloud(1, 60);
  const KnnIndex index(cloud);
  for (int p = 0; p < 60; p += 7) {
    const Frame frame = pivot_ri_xy(cloud, index, p);
    REQUIRE(!frame.degenerate);
    require_orthonormal(frame.rotation);
    REQUIRE(frame.rotation.m[8] == 1.0);
    REQUIRE(frame.rotation.m[2] == 0.0);
    REQUIRE(frame.rotation.m[5] == 0.0);
    const Vec3 v{0.2, -0.4, 0.7};
    REQUIRE(apply_frame(frame, v).z == v.z);
  }
}

TEST_CASE("azimuth pivot rotates the densest cluster onto +x") {
  // Three neighbors stacked at the same azimuth, two strays elsewhere. The
  // cluster wins the histogram, so its direction defines the pivot.
  const double az = 40.0 * kPi / 180.0;
  PointCloud cloud;
  cloud.points.push_back({0, 0, 0});
  for (double r : {0.4, 0.6, 0.8})
    cloud.points.push_back({r * std::cos(az), r * std::sin(az), 0.1 * r});
  cloud.points.push_back({-0.5, 0.1, 0.0});
  cloud.points.push_back({0.0, -0.7, 0.2});
  const KnnIndex index(cloud);
  const Frame frame = pivot_ri_xy(cloud, index, 0, 5);
  REQUIRE(!frame.degenerate);
  for (int j : {1, 2, 3}) {
    const Vec3 aligned = apply_frame(frame, cloud.points[static_cast<size_t>(j)]);
    REQUIRE(std::abs(aligned.y) < 1e-12);
    REQUIRE(aligned.x > 0.0);
  }
}

TEST_CASE("azimuth pivot commutes with z rotations") {
  SplitMix64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const PointCloud cloud = random_cloud(100 + trial, 64);
    const KnnIndex index(cloud);
    const double angle = rng.uniform(0.0, 2 * kPi);
    const Mat3 rot = Mat3::rotation_z(angle);
    const PointCloud turned = rotated(cloud, rot);
    const KnnIndex turned_index(turned);

    for (int p = 0; p < 64; p += 11) {
      const Frame f0 = pivot_ri_xy(cloud, index, p);
      const Frame f1 = pivot_ri_xy(turned, turned_index, p);
      const NeighborList nl = index.knn(p, 8);
      for (int j : nl.indices) {
        const Vec3 off = cloud.points[static_cast<size_t>(j)] -
                         cloud.points[static_cast<size_t>(p)];
        const Vec3 a = apply_frame(f0, off);
        const Vec3 b = apply_frame(f1, rot * off);
        REQUIRE(std::abs(a.x - b.x) < 1e-10);
        REQUIRE(std::abs(a.y - b.y) < 1e-10);
        REQUIRE(std::abs(a.z - b.z) < 1e-10);
      }
    }
  }
}

TEST_CASE("azimuth pivot falls back on clouds without planar spread") {
  PointCloud cloud;
  cloud.points = {{0, 0, 0}, {0, 0, 1}, {0, 0, 2}, {0, 0, -1}};
  const KnnIndex index(cloud);
  const Frame frame = pivot_ri_xy(cloud, index, 0, 3);
  REQUIRE(frame.degenerate);
  REQUIRE(frame.rotation.m == Mat3::identity().m);
}

TEST_CASE("spatial pivot maps the centroid direction onto +x") {
  const PointCloud cloud = random_cloud(3, 80);
  const KnnIndex index(cloud);
  const Vec3 c = cloud.centroid();
  for (int p = 0; p < 80; p += 13) {
    const Frame frame =
        pivot_ri_xyz(cloud, index, p, c);
    REQUIRE(!frame.degenerate);
    require_orthonormal(frame.rotation);
    const Vec3 dir = normalized(c - cloud.points[static_cast<size_t>(p)]);
    const Vec3 mapped = apply_frame(frame, dir);
    REQUIRE(std::abs(mapped.x - 1.0) < 1e-12);
    REQUIRE(std::abs(mapped.y) < 1e-12);
    REQUIRE(std::abs(mapped.z) < 1e-12);
  }
}

TEST_CASE("spatial pivot commutes with arbitrary rotations") {
  SplitMix64 rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    const PointCloud cloud = random_cloud(200 + trial, 64);
    const KnnIndex index(cloud);
    const Vec3 c = cloud.centroid();
    const Mat3 rot = euler_rotation(rng);
    const PointCloud turned = rotated(cloud, rot);
    const KnnIndex turned_index(turned);
    const Vec3 tc = turned.centroid();

    for (int p = 0; p < 64; p += 9) {
      const Frame f0 = pivot_ri_xyz(cloud, index, p, c);
      const Frame f1 = pivot_ri_xyz(turned, turned_index, p, tc);
      const NeighborList nl = index.knn(p, 8);
      for (int j : nl.indices) {
        const Vec3 off = cloud.points[static_cast<size_t>(j)] -
                         cloud.points[static_cast<size_t>(p)];
        const Vec3 a = apply_frame(f0, off);
        const Vec3 b = apply_frame(f1, rot * off);
        REQUIRE(std::abs(a.x - b.x) < 1e-10);
        REQUIRE(std::abs(a.y - b.y) < 1e-10);
        REQUIRE(std::abs(a.z - b.z) < 1e-10);
      }
    }
  }
}

TEST_CASE("spatial pivot fallbacks stay valid rotations") {
  // Query point sitting exactly at the object centroid.
  PointCloud star;
  star.points = {{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}};
  const KnnIndex star_index(star);
  const Frame at_center = pivot_ri_xyz(star, star_index, 0, star.centroid());
  REQUIRE(at_center.degenerate);
  require_orthonormal(at_center.rotation);

  // Collinear cloud: the local centroid direction is parallel to the object
  // centroid direction, so the azimuth is arbitrary but deterministic.
  PointCloud line;
  for (int i = 0; i < 6; ++i) line.points.push_back({double(i), 0, 0});
  const KnnIndex line_index(line);
  const Frame on_line = pivot_ri_xyz(line, line_index, 0, line.centroid());
  REQUIRE(on_line.degenerate);
  require_orthonormal(on_line.rotation);
}

TEST_CASE("pivots ignore point duplication") {
  const PointCloud cloud = random_cloud(31, 48);
  PointCloud doubled = cloud;
  for (const Vec3& p : cloud.points) doubled.points.push_back(p);
  const KnnIndex index(cloud);
  const KnnIndex doubled_index(doubled);
  const Vec3 c = cloud.centroid();
  const Vec3 dc = doubled.centroid();

  for (int p = 0; p < 48; p += 7) {
    const Frame a = pivot_ri_xy(cloud, index, p);
    const Frame b = pivot_ri_xy(doubled, doubled_index, p);
    for (int i = 0; i < 9; ++i) REQUIRE(a.rotation.m[static_cast<size_t>(i)] ==
                                        b.rotation.m[static_cast<size_t>(i)]);
    const Frame s = pivot_ri_xyz(cloud, index, p, c);
    const Frame t = pivot_ri_xyz(doubled, doubled_index, p, dc);
    for (int i = 0; i < 9; ++i)
      REQUIRE(std::abs(s.rotation.m[static_cast<size_t>(i)] -
                       t.rotation.m[static_cast<size_t>(i)]) < 1e-12);
  }
}

TEST_CASE("frame batches match single-point construction") {
  const PointCloud cloud = random_cloud(5, 40);
  const KnnIndex index(cloud);
  const Vec3 c = cloud.centroid();
  for (AlignMode mode : {AlignMode::None, AlignMode::RiXY, AlignMode::RiXYZ}) {
    const std::vector<Frame> frames = alignment_frames(mode, cloud, index);
    REQUIRE(frames.size() == cloud.size());
    for (size_t p = 0; p < cloud.size(); ++p) {
      const Frame single =
          alignment_frame(mode, cloud, index, static_cast<int>(p), c);
      for (int i = 0; i < 9; ++i)
        REQUIRE(frames[p].rotation.m[static_cast<size_t>(i)] ==
                single.rotation.m[static_cast<size_t>(i)]);
      REQUIRE(frames[p].degenerate == single.degenerate);
    }
  }
}
