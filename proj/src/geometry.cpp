#include "odfnet/geometry.hpp"

#include <algorithm>
#include <map>
#include <utility>

namespace odfnet {

Vec3 PointCloud::centroid() const {
  Vec3 c;
  for (const Vec3& p : points) c += p;
  return c / static_cast<double>(points.size());
}

PointCloud normalize_to_unit_sphere(const PointCloud& cloud) {
  if (cloud.points.empty())
    throw Error(ErrorKind::InvalidArgument, "normalize: empty cloud");
  const Vec3 c = cloud.centroid();
  double max_sq = 0.0;
  for (const Vec3& p : cloud.points)
    max_sq = std::max(max_sq, squared_distance(p, c));
  const double radius = std::sqrt(max_sq);
  if (radius < 1e-12)
    throw Error(ErrorKind::Degenerate, "normalize: all points coincide");
  PointCloud out = cloud;
  const double inv = 1.0 / radius;
  for (Vec3& p : out.points) p = (p - c) * inv;
  return out;
}

PointCloud translated(const PointCloud& cloud, const Vec3& offset) {
  PointCloud out = cloud;
  for (Vec3& p : out.points) p += offset;
  return out;
}

PointCloud rotated(const PointCloud& cloud, const Mat3& rotation) {
  PointCloud out = cloud;
  for (Vec3& p : out.points) p = rotation * p;
  return out;
}

PointCloud rotated_z(const PointCloud& cloud, double radians) {
  return rotated(cloud, Mat3::rotation_z(radians));
}

PointCloud scaled(const PointCloud& cloud, double sx, double sy, double sz) {
  PointCloud out = cloud;
  for (Vec3& p : out.points) p = {p.x * sx, p.y * sy, p.z * sz};
  return out;
}

namespace {

// Golden-ratio icosahedron: (0, +-1, +-phi) and cyclic permutations. The
// vertex and face order below is fixed; it determines the direction layout
// of every feature tensor, so it must never change.
std::vector<Vec3> icosahedron_vertices() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {
      {-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1},
  };
  for (Vec3& p : v) p = normalized(p);
  return v;
}

const int kIcosahedronFaces[20][3] = {
    {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
    {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
    {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
    {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
};

}  // namespace

DirectionSet icosphere_directions(int level) {
  if (level < 0 || level > 2)
    throw Error(ErrorKind::InvalidArgument,
                "icosphere level must be 0, 1 or 2");

  std::vector<Vec3> vertices = icosahedron_vertices();
  std::vector<std::array<int, 3>> faces;
  faces.reserve(20);
  for (const auto& f : kIcosahedronFaces) faces.push_back({f[0], f[1], f[2]});

  for (int step = 0; step < level; ++step) {
    // Shared edge midpoints are deduplicated by sorted-endpoint key so the
    // vertex counts come out exactly 42 and 162.
    std::map<std::pair<int, int>, int> midpoint;
    auto midpoint_of = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int id = static_cast<int>(vertices.size());
      vertices.push_back(normalized(vertices[a] + vertices[b]));
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = midpoint_of(f[0], f[1]);
      const int bc = midpoint_of(f[1], f[2]);
      const int ca = midpoint_of(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  DirectionSet set;
  set.level = level;
  set.directions = std::move(vertices);
  return set;
}

KnnIndex::KnnIndex(const PointCloud& cloud) : points_(cloud.points) {
  if (points_.size() < 2)
    throw Error(ErrorKind::InvalidArgument,
                "knn index needs at least 2 points");
  order_.resize(points_.size());
  for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
  nodes_.reserve(2 * points_.size() / 4 + 2);
  root_ = build(0, static_cast<int>(points_.size()));
}

int KnnIndex::build(int begin, int end) {
  constexpr int kLeafSize = 8;
  Node node;
  if (end - begin <= kLeafSize) {
    node.begin = begin;
    node.end = end;
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }

  // Split on the widest axis at the median; ties on coordinate fall back to
  // point index so the tree is a pure function of the cloud.
  Vec3 lo = points_[order_[begin]], hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    const Vec3& p = points_[order_[i]];
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
  const double ex = hi.x - lo.x, ey = hi.y - lo.y, ez = hi.z - lo.z;
  int axis = 0;
  if (ey > ex || ez > ex) axis = (ez > ey) ? 2 : 1;

  auto coord = [&](int idx) {
    const Vec3& p = points_[idx];
    return axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
  };
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](int a, int b) {
                     const double ca = coord(a), cb = coord(b);
                     return ca < cb || (ca == cb && a < b);
                   });

  node.axis = axis;
  node.split = coord(order_[mid]);
  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

namespace {

// Max-heap ordering on (squared distance, index): the root is the current
// worst candidate. Lower index wins distance ties, matching brute force.
inline bool heap_less(const std::pair<double, int>& a,
                      const std::pair<double, int>& b) {
  return a.first < b.first || (a.first == b.first && a.second < b.second);
}

}  // namespace

void KnnIndex::search(int node_id, const Vec3& query, int skip_index, int k,
                      std::vector<std::pair<double, int>>& heap) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const int idx = order_[i];
      if (idx == skip_index) continue;
      const double d2 = squared_distance(points_[idx], query);
      const std::pair<double, int> cand{d2, idx};
      if (static_cast<int>(heap.size()) < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), heap_less);
      } else if (heap_less(cand, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), heap_less);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), heap_less);
      }
    }
    return;
  }

  const double q = node.axis == 0 ? query.x : (node.axis == 1 ? query.y : query.z);
  const double diff = q - node.split;
  const int near = diff < 0.0 ? node.left : node.right;
  const int far = diff < 0.0 ? node.right : node.left;
  search(near, query, skip_index, k, heap);
  // Equal plane distance can still hide an index tie-break winner, so only a
  // strictly farther slab is pruned.
  if (static_cast<int>(heap.size()) < k || diff * diff <= heap.front().first)
    search(far, query, skip_index, k, heap);
}

NeighborList KnnIndex::knn(int query_index, int k) const {
  const int n = static_cast<int>(points_.size());
  if (query_index < 0 || query_index >= n)
    throw Error(ErrorKind::InvalidArgument, "knn: query index out of range");
  if (k < 1 || k >= n)
    throw Error(ErrorKind::InvalidArgument,
                "knn: k must satisfy 1 <= k < cloud size");

  std::vector<std::pair<double, int>> heap;
  heap.reserve(static_cast<size_t>(k));
  search(root_, points_[query_index], query_index, k, heap);
  std::sort(heap.begin(), heap.end(), heap_less);

  NeighborList out;
  out.indices.reserve(heap.size());
  out.distances.reserve(heap.size());
  for (const auto& [d2, idx] : heap) {
    out.indices.push_back(idx);
    out.distances.push_back(std::sqrt(d2));
  }
  return out;
}

NeighborList KnnIndex::knn_distinct(int query_index, int k) const {
  const int n = static_cast<int>(points_.size());
  if (k < 1)
    throw Error(ErrorKind::InvalidArgument, "knn_distinct: k must be >= 1");
  if (n < 2)
    throw Error(ErrorKind::Degenerate, "knn_distinct: no distinct neighbor positions");

  int request = std::min(n - 1, k + 4);
  for (;;) {
    NeighborList raw = knn(query_index, request);
    NeighborList out;
    // A duplicate position always shares its representative's distance, so
    // only the tail of equal-distance entries needs to be checked.
    auto seen = [&](const Vec3& p, double d) {
      for (size_t j = out.size(); j-- > 0 && out.distances[j] == d;) {
        const Vec3& kept = points_[static_cast<size_t>(out.indices[j])];
        if (kept.x == p.x && kept.y == p.y && kept.z == p.z) return true;
      }
      return false;
    };
    for (size_t i = 0; i < raw.size(); ++i) {
      if (raw.distances[i] == 0.0) continue;  // duplicate of the query point
      const Vec3& p = points_[static_cast<size_t>(raw.indices[i])];
      if (seen(p, raw.distances[i])) continue;
      out.indices.push_back(raw.indices[i]);
      out.distances.push_back(raw.distances[i]);
      if (static_cast<int>(out.size()) == k) return out;
    }
    if (request == n - 1) {
      if (out.indices.empty())
        throw Error(ErrorKind::Degenerate,
                    "knn_distinct: no distinct neighbor positions");
      return out;  // fewer than k distinct positions exist
    }
    request = std::min(n - 1, request * 2);
  }
}

}  // namespace odfnet
