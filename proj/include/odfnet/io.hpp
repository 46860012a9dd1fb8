#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odfnet/geometry.hpp"
#include "odfnet/odf.hpp"

namespace odfnet {

// Text cloud readers. All reject malformed input with path:line positioned
// parse errors; nothing is returned from a partial read.
PointCloud read_xyz(const std::string& path);
PointCloud read_off(const std::string& path);
PointCloud read_ply_ascii(const std::string& path);
// Dispatch on extension: .xyz / .off / .ply
PointCloud read_point_cloud(const std::string& path);

// 17 significant digits, enough to reproduce every double exactly on read.
void write_xyz(const PointCloud& cloud, const std::string& path);

// ODF field binary: magic "ODF1", u32 version/points/directions/scales,
// u8 alignment mode, 3 reserved zero bytes, then point-major f32 values,
// everything little-endian. Round trips are byte-exact.
void write_odf(const OdfField& field, const std::string& path);
OdfField read_odf(const std::string& path);

struct SyntheticSpec {
  int samples_per_class = 100;
  int points_per_cloud = 512;
  double sigma = 0.02;
  uint64_t seed = 29;
};

struct Dataset {
  std::vector<PointCloud> clouds;  // labels carried on the clouds
  std::vector<std::string> class_names;

  int class_count() const { return static_cast<int>(class_names.size()); }
  size_t size() const { return clouds.size(); }
};

// Four shape classes (sphere shell, box, two-plane corner, cylinder),
// surface-sampled with Gaussian jitter, unit-sphere normalized, fully
// deterministic in the seed.
Dataset generate_synthetic_dataset(const SyntheticSpec& spec);

// Fixed 80/20 split by per-class sample index.
void split_dataset(const Dataset& all, Dataset* train, Dataset* test);

// Directory of class subdirectories, each holding cloud files; class and file
// order is lexicographic so labels are stable. Every cloud is unit-sphere
// normalized on load, matching the classifier's input contract.
Dataset load_dataset_directory(const std::string& path);

// OBJ line geometry: per selected point, one segment along each direction
// whose max-over-scales value is nonzero, length proportional to that value
// and normalized per point by the point's strongest cone.
void export_glyphs(const PointCloud& cloud, const OdfField& field,
                   const DirectionSet& directions,
                   const std::vector<int>& selection, const std::string& path,
                   double glyph_scale = 0.1);

}  // namespace odfnet
