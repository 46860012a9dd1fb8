#pragma once

#include <vector>

#include "odfnet/alignment.hpp"
#include "odfnet/geometry.hpp"

namespace odfnet {

// Bank of cones probed around every point: one cone per (direction, rank,
// half-angle) triple. The cone for rank n reaches exactly to the n-th nearest
// neighbor, so the bank adapts to local sampling density.
struct ConeBank {
  DirectionSet directions;
  std::vector<int> ranks;        // ascending neighbor ranks, e.g. 8,16,24,32
  std::vector<double> alphas;    // half-angles in radians
  std::vector<double> cos_alphas;

  int direction_count() const { return static_cast<int>(directions.directions.size()); }
  // Scales are ordered rank-major: (r0,a0), (r0,a1), (r1,a0), ...
  int scales_per_direction() const {
    return static_cast<int>(ranks.size() * alphas.size());
  }
  int cone_count() const { return direction_count() * scales_per_direction(); }
  int max_rank() const { return ranks.empty() ? 0 : ranks.back(); }
};

ConeBank make_cone_bank(int subdivision_level, std::vector<int> ranks,
                        std::vector<double> alphas_radians);

// 42 directions, ranks 8/16/24/32, half-angles 31.71 and 60 degrees: 336 cones.
ConeBank default_cone_bank();

// One cone membership test, shared by the indexed path and the brute-force
// oracle so both count exactly the same points. A neighbor at `offset` with
// euclidean `distance` from the center lies strictly inside the infinite cone
// around unit `axis` iff its angle to the axis is strictly below the
// half-angle; zero-distance duplicates have no direction and never count.
inline bool cone_contains(const Vec3& offset, double distance, const Vec3& axis,
                          double cos_alpha) {
  return distance > 0.0 && dot(offset, axis) > distance * cos_alpha;
}

// Per-point descriptor: for every cone, the number of neighbors strictly
// inside it and strictly closer than the rank height, divided by the rank.
// Layout is direction-major: value(l, s) at [l * scales + s]. Offsets are
// expressed in `frame` coordinates before the direction test; distances and
// rank heights are frame-independent.
std::vector<double> odf_point(const PointCloud& cloud, const KnnIndex& index,
                              int point_index, const ConeBank& bank,
                              const Frame& frame = Frame{});

// Straight-line reference: full distance scan, selection by sorting, no
// spatial index. Used to cross-check the indexed path.
std::vector<double> odf_brute_force(const PointCloud& cloud, int point_index,
                                    const ConeBank& bank);

// Whole-cloud descriptors in double precision, point-major:
// [point][direction][scale]. With an alignment mode, each point's offsets are
// rotated into its canonical frame first.
std::vector<double> odf_cloud_values(const PointCloud& cloud, const ConeBank& bank,
                                     AlignMode align = AlignMode::None,
                                     int workers = 1);

// Export container, single precision.
struct OdfField {
  int point_count = 0;
  int direction_count = 0;
  int scale_count = 0;
  AlignMode align = AlignMode::None;
  std::vector<float> values;  // point-major [point][direction][scale]

  size_t value_count() const { return values.size(); }
  float at(int point, int direction, int scale) const {
    return values[(static_cast<size_t>(point) * direction_count + direction) *
                      scale_count + scale];
  }
};

OdfField compute_odf_field(const PointCloud& cloud, const ConeBank& bank,
                           AlignMode align = AlignMode::None, int workers = 1);

}  // namespace odfnet
