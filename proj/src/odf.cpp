#include "odfnet/odf.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include "odfnet/error.hpp"
#include "odfnet/parallel.hpp"

namespace odfnet {
namespace {

void check_cloud_size(size_t point_count, int max_rank) {
  if (static_cast<int>(point_count) <= max_rank)
    throw Error(ErrorKind::InvalidArgument,
                "cloud has " + std::to_string(point_count) +
                    " points but rank " + std::to_string(max_rank) +
                    " needs at least " + std::to_string(max_rank + 1));
}

}  // namespace

ConeBank make_cone_bank(int subdivision_level, std::vector<int> ranks,
                        std::vector<double> alphas_radians) {
  if (ranks.empty())
    throw Error(ErrorKind::InvalidArgument, "cone bank needs at least one rank");
  for (size_t i = 0; i < ranks.size(); ++i) {
    if (ranks[i] < 1)
      throw Error(ErrorKind::InvalidArgument, "cone ranks must be positive");
    if (i > 0 && ranks[i] <= ranks[i - 1])
      throw Error(ErrorKind::InvalidArgument, "cone ranks must be strictly ascending");
  }
  if (alphas_radians.empty())
    throw Error(ErrorKind::InvalidArgument, "cone bank needs at least one half-angle");
  for (double a : alphas_radians)
    if (!(a > 0.0) || a > std::numbers::pi_v<double>)
      throw Error(ErrorKind::InvalidArgument,
                  "cone half-angles must lie in (0, pi] radians");

  ConeBank bank;
  bank.directions = icosphere_directions(subdivision_level);
  bank.ranks = std::move(ranks);
  bank.alphas = std::move(alphas_radians);
  bank.cos_alphas.reserve(bank.alphas.size());
  for (double a : bank.alphas) bank.cos_alphas.push_back(std::cos(a));
  return bank;
}

ConeBank default_cone_bank() {
  constexpr double deg = std::numbers::pi_v<double> / 180.0;
  return make_cone_bank(1, {8, 16, 24, 32}, {31.71 * deg, 60.0 * deg});
}

std::vector<double> odf_point(const PointCloud& cloud, const KnnIndex& index,
                              int point_index, const ConeBank& bank,
                              const Frame& frame) {
  check_cloud_size(cloud.size(), bank.max_rank());
  const NeighborList neighbors = index.knn(point_index, bank.max_rank());
  const Vec3& origin = cloud.points[static_cast<size_t>(point_index)];
  const int m = static_cast<int>(neighbors.size());
  const int rank_count = static_cast<int>(bank.ranks.size());
  const int alpha_count = static_cast<int>(bank.alphas.size());
  const int scales = bank.scales_per_direction();

  std::vector<double> heights(bank.ranks.size());
  for (size_t ri = 0; ri < bank.ranks.size(); ++ri)
    heights[ri] = neighbors.distances[static_cast<size_t>(bank.ranks[ri] - 1)];

  std::vector<Vec3> offsets(static_cast<size_t>(m));
  for (int j = 0; j < m; ++j)
    offsets[static_cast<size_t>(j)] = apply_frame(
        frame, cloud.points[static_cast<size_t>(neighbors.indices[j])] - origin);

  std::vector<double> values(static_cast<size_t>(bank.cone_count()));
  std::vector<double> dots(static_cast<size_t>(m));
  for (int l = 0; l < bank.direction_count(); ++l) {
    const Vec3& axis = bank.directions.directions[static_cast<size_t>(l)];
    for (int j = 0; j < m; ++j)
      dots[static_cast<size_t>(j)] = dot(offsets[static_cast<size_t>(j)], axis);

    for (int ai = 0; ai < alpha_count; ++ai) {
      const double cos_alpha = bank.cos_alphas[static_cast<size_t>(ai)];
      // Neighbors are sorted by distance, so each rank height cuts off a
      // prefix; one pass accumulates the counts for every rank.
      int acc = 0;
      int ri = 0;
      auto store = [&](int rank_index, int count) {
        values[static_cast<size_t>(l * scales + rank_index * alpha_count + ai)] =
            static_cast<double>(count) /
            static_cast<double>(bank.ranks[static_cast<size_t>(rank_index)]);
      };
      for (int j = 0; j < m && ri < rank_count; ++j) {
        const double d = neighbors.distances[static_cast<size_t>(j)];
        while (ri < rank_count && d >= heights[static_cast<size_t>(ri)])
          store(ri++, acc);
        if (ri == rank_count) break;
        if (d > 0.0 && dots[static_cast<size_t>(j)] > d * cos_alpha) ++acc;
      }
      while (ri < rank_count) store(ri++, acc);
    }
  }
  return values;
}

std::vector<double> odf_brute_force(const PointCloud& cloud, int point_index,
                                    const ConeBank& bank) {
  const int n = static_cast<int>(cloud.size());
  if (point_index < 0 || point_index >= n)
    throw Error(ErrorKind::InvalidArgument, "odf_brute_force: point index out of range");
  check_cloud_size(cloud.size(), bank.max_rank());
  const Vec3& origin = cloud.points[static_cast<size_t>(point_index)];

  std::vector<Vec3> offsets;
  std::vector<double> distances;
  std::vector<std::pair<double, int>> order;
  offsets.reserve(static_cast<size_t>(n) - 1);
  for (int j = 0; j < n; ++j) {
    if (j == point_index) continue;
    const Vec3 off = cloud.points[static_cast<size_t>(j)] - origin;
    const double d = std::sqrt(squared_distance(cloud.points[static_cast<size_t>(j)], origin));
    offsets.push_back(off);
    distances.push_back(d);
    order.emplace_back(d, j);
  }
  std::sort(order.begin(), order.end());

  const int alpha_count = static_cast<int>(bank.alphas.size());
  const int scales = bank.scales_per_direction();
  std::vector<double> values(static_cast<size_t>(bank.cone_count()));
  for (int l = 0; l < bank.direction_count(); ++l) {
    const Vec3& axis = bank.directions.directions[static_cast<size_t>(l)];
    for (size_t ri = 0; ri < bank.ranks.size(); ++ri) {
      const int rank = bank.ranks[ri];
      const double height = order[static_cast<size_t>(rank - 1)].first;
      for (int ai = 0; ai < alpha_count; ++ai) {
        const double cos_alpha = bank.cos_alphas[static_cast<size_t>(ai)];
        int count = 0;
        for (size_t j = 0; j < offsets.size(); ++j)
          if (distances[j] < height &&
              cone_contains(offsets[j], distances[j], axis, cos_alpha))
            ++count;
        values[static_cast<size_t>(l * scales + static_cast<int>(ri) * alpha_count + ai)] =
            static_cast<double>(count) / static_cast<double>(rank);
      }
    }
  }
  return values;
}

std::vector<double> odf_cloud_values(const PointCloud& cloud, const ConeBank& bank,
                                     AlignMode align, int workers) {
  check_cloud_size(cloud.size(), bank.max_rank());
  const int n = static_cast<int>(cloud.size());
  const int per_point = bank.cone_count();
  const KnnIndex index(cloud);
  const Vec3 centroid = align == AlignMode::RiXYZ ? cloud.centroid() : Vec3{};

  std::vector<double> values(static_cast<size_t>(n) * per_point);
  parallel_for(n, workers, [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      const Frame frame = alignment_frame(align, cloud, index, i, centroid);
      const std::vector<double> point_values = odf_point(cloud, index, i, bank, frame);
      std::copy(point_values.begin(), point_values.end(),
                values.begin() + static_cast<size_t>(i) * per_point);
    }
  });
  return values;
}

OdfField compute_odf_field(const PointCloud& cloud, const ConeBank& bank,
                           AlignMode align, int workers) {
  const std::vector<double> values = odf_cloud_values(cloud, bank, align, workers);
  OdfField field;
  field.point_count = static_cast<int>(cloud.size());
  field.direction_count = bank.direction_count();
  field.scale_count = bank.scales_per_direction();
  field.align = align;
  field.values.reserve(values.size());
  for (double v : values) field.values.push_back(static_cast<float>(v));
  return field;
}

}  // namespace odfnet
