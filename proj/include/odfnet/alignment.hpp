#pragma once

#include <string>
#include <vector>

#include "odfnet/geometry.hpp"

namespace odfnet {

// Rotation-invariant local frames. A frame maps world-space offsets around a
// point into a canonical orientation, so features computed in frame
// coordinates do not change when the whole cloud is rotated.
enum class AlignMode {
  None,  // identity frames
  RiXY,  // canonical azimuth, invariant to rotations about z
  RiXYZ, // canonical 3d basis, invariant to arbitrary rotations
};

const char* align_mode_name(AlignMode mode);
AlignMode align_mode_from_string(const std::string& name);

struct Frame {
  Mat3 rotation = Mat3::identity();
  // Set when the construction hit a fallback (no usable neighbor offsets,
  // point at the object centroid, collinear centroids). The frame is still a
  // valid rotation, just not canonical.
  bool degenerate = false;
};

inline Vec3 apply_frame(const Frame& frame, const Vec3& v) {
  return frame.rotation * v;
}

// Canonical azimuth frame. Projects the offsets to the k nearest neighbors
// onto the xy plane, finds the densest 10-degree azimuth bin (bins anchored
// at the first usable offset so the histogram itself rotates with the cloud),
// and rotates about z so the mean direction of that bin lands on +x.
Frame pivot_ri_xy(const PointCloud& cloud, const KnnIndex& index,
                  int point_index, int k = 32);

// Canonical 3d frame from two reference directions: toward the object
// centroid and toward the centroid of the k nearest neighbors.
Frame pivot_ri_xyz(const PointCloud& cloud, const KnnIndex& index,
                   int point_index, const Vec3& object_centroid, int k = 32);

Frame alignment_frame(AlignMode mode, const PointCloud& cloud,
                      const KnnIndex& index, int point_index,
                      const Vec3& object_centroid, int k = 32);

// Frames for every point; computes the object centroid once.
std::vector<Frame> alignment_frames(AlignMode mode, const PointCloud& cloud,
                                    const KnnIndex& index, int k = 32);

}  // namespace odfnet
