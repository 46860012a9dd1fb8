#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "odfnet/error.hpp"

namespace odfnet {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }

  double squared_norm() const { return x * x + y * y + z * z; }
  double norm() const { return std::sqrt(squared_norm()); }
};

inline double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline Vec3 normalized(const Vec3& v) { return v / v.norm(); }

inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

/// Angle between two vectors in [0, pi], 0 if either is (near-)zero.
inline double angle_between(const Vec3& a, const Vec3& b) {
  const double c = cross(a, b).norm();
  const double d = dot(a, b);
  if (c == 0.0 && d == 0.0) return 0.0;
  return std::atan2(c, d);
}

/// Row-major 3x3 matrix; rotations act on column vectors (v' = R * v).
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return Mat3{}; }

  static Mat3 rotation_z(double radians) {
    const double c = std::cos(radians), s = std::sin(radians);
    return Mat3{{c, -s, 0, s, c, 0, 0, 0, 1}};
  }

  static Mat3 from_columns(const Vec3& c0, const Vec3& c1, const Vec3& c2) {
    return Mat3{{c0.x, c1.x, c2.x, c0.y, c1.y, c2.y, c0.z, c1.z, c2.z}};
  }

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += m[i * 3 + k] * o.m[k * 3 + j];
        r.m[i * 3 + j] = s;
      }
    return r;
  }

  Mat3 transposed() const {
    return Mat3{{m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]}};
  }

  Vec3 column(int j) const { return {m[j], m[3 + j], m[6 + j]}; }

  double determinant() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) -
           m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }

  /// Multiply by the transpose: R^T * v. For rotations this maps world
  /// coordinates into the frame whose axes are the columns of R.
  Vec3 transposed_mul(const Vec3& v) const {
    return {m[0] * v.x + m[3] * v.y + m[6] * v.z,
            m[1] * v.x + m[4] * v.y + m[7] * v.z,
            m[2] * v.x + m[5] * v.y + m[8] * v.z};
  }
};

using Rgb = std::array<float, 3>;

/// Ordered point set, optionally colored and labeled. Geometry is kept in
/// 64-bit floats end to end; only exported feature tensors are narrowed.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Rgb> colors;  // empty, or one entry per point
  int label = -1;

  size_t size() const { return points.size(); }
  bool has_colors() const { return !colors.empty(); }

  Vec3 centroid() const;
};

/// Centers the cloud on its centroid and scales so the farthest point sits on
/// the unit sphere. Ordering, colors and label are preserved.
/// Throws Degenerate if all points coincide.
PointCloud normalize_to_unit_sphere(const PointCloud& cloud);

PointCloud translated(const PointCloud& cloud, const Vec3& offset);
PointCloud rotated(const PointCloud& cloud, const Mat3& rotation);
PointCloud rotated_z(const PointCloud& cloud, double radians);
PointCloud scaled(const PointCloud& cloud, double sx, double sy, double sz);

/// Unit direction vectors from icosahedron subdivision.
/// level 0 = the 12 icosahedron vertices, each level splits every edge at its
/// midpoint and reprojects onto the sphere: 12 / 42 / 162 directions.
struct DirectionSet {
  int level = 0;
  std::vector<Vec3> directions;

  size_t size() const { return directions.size(); }
};

DirectionSet icosphere_directions(int level);

/// Neighbor ranks and distances for one query point, sorted by ascending
/// distance with ties broken by lower point index. The query point itself is
/// never included.
struct NeighborList {
  std::vector<int> indices;
  std::vector<double> distances;

  size_t size() const { return indices.size(); }
};

/// Exact k-nearest-neighbor index (k-d tree). Immutable once built; queries
/// from multiple threads are safe.
class KnnIndex {
 public:
  explicit KnnIndex(const PointCloud& cloud);

  size_t size() const { return points_.size(); }
  const Vec3& point(int i) const { return points_[static_cast<size_t>(i)]; }

  /// k nearest neighbors of cloud point `query_index` (excluded itself).
  NeighborList knn(int query_index, int k) const;

  /// Like knn, but collapses exact duplicate coordinates: the result holds
  /// the k nearest *distinct positions* (zero-distance neighbors skipped,
  /// repeated positions kept once, lowest index representative). Used by the
  /// edge-feature stage so duplicated points do not alter neighborhoods.
  NeighborList knn_distinct(int query_index, int k) const;

 private:
  struct Node {
    int axis = -1;         // -1 marks a leaf
    double split = 0.0;
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf range into order_
  };

  void search(int node, const Vec3& query, int skip_index, int k,
              std::vector<std::pair<double, int>>& heap) const;
  int build(int begin, int end);

  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace odfnet
