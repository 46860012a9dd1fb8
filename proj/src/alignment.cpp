#include "odfnet/alignment.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "odfnet/error.hpp"

namespace odfnet {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr int kAzimuthBins = 36;
constexpr double kMinPlanarNorm = 1e-9;
constexpr double kMinDirectionNorm = 1e-12;

Mat3 from_rows(const Vec3& r0, const Vec3& r1, const Vec3& r2) {
  return Mat3{{r0.x, r0.y, r0.z, r1.x, r1.y, r1.z, r2.x, r2.y, r2.z}};
}

// Unit vector orthogonal to unit-length p, chosen by crossing with the
// coordinate axis p points along least.
Vec3 any_orthogonal(const Vec3& p) {
  const double ax = std::fabs(p.x), ay = std::fabs(p.y), az = std::fabs(p.z);
  Vec3 axis{1.0, 0.0, 0.0};
  if (ay <= ax && ay <= az)
    axis = Vec3{0.0, 1.0, 0.0};
  else if (az <= ax && az <= ay)
    axis = Vec3{0.0, 0.0, 1.0};
  return normalized(cross(p, axis));
}

}  // namespace

const char* align_mode_name(AlignMode mode) {
  switch (mode) {
    case AlignMode::None: return "none";
    case AlignMode::RiXY: return "rixy";
    case AlignMode::RiXYZ: return "rixyz";
  }
  return "unknown";
}

AlignMode align_mode_from_string(const std::string& name) {
  if (name == "none") return AlignMode::None;
  if (name == "rixy") return AlignMode::RiXY;
  if (name == "rixyz") return AlignMode::RiXYZ;
  throw Error(ErrorKind::InvalidArgument,
              "unknown alignment mode '" + name + "' (none|rixy|rixyz)");
}

Frame pivot_ri_xy(const PointCloud& cloud, const KnnIndex& index,
                  int point_index, int k) {
  const int n = static_cast<int>(cloud.size());
  if (point_index < 0 || point_index >= n)
    throw Error(ErrorKind::InvalidArgument, "pivot_ri_xy: point index out of range");
  if (n < 2) return Frame{Mat3::identity(), true};

  const Vec3& origin = cloud.points[static_cast<size_t>(point_index)];
  // Distinct positions only: the frame then does not change when points are
  // duplicated, and on generic clouds this equals the plain neighbor list.
  const NeighborList neighbors = index.knn_distinct(point_index, k);

  // Azimuths of the planar neighbor offsets. Offsets too close to the z axis
  // have no meaningful azimuth and are dropped.
  std::vector<double> azimuths;
  std::vector<std::array<double, 2>> planar;
  azimuths.reserve(neighbors.size());
  planar.reserve(neighbors.size());
  for (int j : neighbors.indices) {
    const Vec3 off = cloud.points[static_cast<size_t>(j)] - origin;
    if (std::hypot(off.x, off.y) < kMinPlanarNorm) continue;
    azimuths.push_back(std::atan2(off.y, off.x));
    planar.push_back({off.x, off.y});
  }
  if (azimuths.empty()) return Frame{Mat3::identity(), true};

  // Histogram anchored at the first usable offset: bin boundaries rotate with
  // the cloud, so bin memberships (and the tie-break below) are stable under
  // z rotations instead of depending on world-fixed boundaries.
  const double anchor = azimuths.front();
  const double bin_width = kTwoPi / kAzimuthBins;
  std::array<int, kAzimuthBins> counts{};
  std::vector<int> bins(azimuths.size());
  for (size_t i = 0; i < azimuths.size(); ++i) {
    double rel = std::fmod(azimuths[i] - anchor, kTwoPi);
    if (rel < 0.0) rel += kTwoPi;
    if (rel >= kTwoPi) rel = 0.0;
    int bin = std::min(kAzimuthBins - 1, static_cast<int>(rel / bin_width));
    bins[i] = bin;
    ++counts[static_cast<size_t>(bin)];
  }
  int best = 0;
  for (int b = 1; b < kAzimuthBins; ++b)
    if (counts[static_cast<size_t>(b)] > counts[static_cast<size_t>(best)]) best = b;

  // Pivot azimuth: direction of the summed planar offsets in the densest bin.
  // All members lie inside one 10-degree wedge, so the sum cannot vanish.
  double sx = 0.0, sy = 0.0;
  for (size_t i = 0; i < planar.size(); ++i) {
    if (bins[i] != best) continue;
    sx += planar[i][0];
    sy += planar[i][1];
  }
  const double theta = std::atan2(sy, sx);
  return Frame{Mat3::rotation_z(-theta), false};
}

Frame pivot_ri_xyz(const PointCloud& cloud, const KnnIndex& index,
                   int point_index, const Vec3& object_centroid, int k) {
  const int n = static_cast<int>(cloud.size());
  if (point_index < 0 || point_index >= n)
    throw Error(ErrorKind::InvalidArgument, "pivot_ri_xyz: point index out of range");

  const Vec3& origin = cloud.points[static_cast<size_t>(point_index)];
  bool degenerate = false;

  Vec3 p1;
  const Vec3 to_centroid = object_centroid - origin;
  if (to_centroid.norm() < kMinDirectionNorm) {
    p1 = Vec3{0.0, 0.0, 1.0};
    degenerate = true;
  } else {
    p1 = normalized(to_centroid);
  }

  Vec3 to_local{0.0, 0.0, 0.0};
  if (n >= 2) {
    const NeighborList neighbors = index.knn_distinct(point_index, k);
    Vec3 local{0.0, 0.0, 0.0};
    for (int j : neighbors.indices) local = local + cloud.points[static_cast<size_t>(j)];
    to_local = local / static_cast<double>(neighbors.size()) - origin;
  }

  Vec3 p2;
  const Vec3 v = cross(p1, to_local);
  if (v.norm() < kMinDirectionNorm) {
    // Local centroid missing or collinear with the centroid direction; any
    // azimuth around p1 is as good as another, pick one deterministically.
    p2 = any_orthogonal(p1);
    degenerate = true;
  } else {
    p2 = normalized(v);
  }
  const Vec3 p3 = cross(p1, p2);
  return Frame{from_rows(p1, p2, p3), degenerate};
}

Frame alignment_frame(AlignMode mode, const PointCloud& cloud,
                      const KnnIndex& index, int point_index,
                      const Vec3& object_centroid, int k) {
  switch (mode) {
    case AlignMode::None: return Frame{};
    case AlignMode::RiXY: return pivot_ri_xy(cloud, index, point_index, k);
    case AlignMode::RiXYZ:
      return pivot_ri_xyz(cloud, index, point_index, object_centroid, k);
  }
  throw Error(ErrorKind::InvalidArgument, "alignment_frame: bad mode");
}

std::vector<Frame> alignment_frames(AlignMode mode, const PointCloud& cloud,
                                    const KnnIndex& index, int k) {
  std::vector<Frame> frames(cloud.size());
  if (mode == AlignMode::None) return frames;
  const Vec3 c = mode == AlignMode::RiXYZ ? cloud.centroid() : Vec3{0.0, 0.0, 0.0};
  for (size_t i = 0; i < cloud.size(); ++i)
    frames[i] = alignment_frame(mode, cloud, index, static_cast<int>(i), c, k);
  return frames;
}

}  // namespace odfnet
