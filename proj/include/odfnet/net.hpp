#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odfnet/alignment.hpp"
#include "odfnet/geometry.hpp"
#include "odfnet/io.hpp"
#include "odfnet/odf.hpp"
#include "odfnet/rng.hpp"

namespace odfnet {

// Standard: per-point features carry aligned coordinates and edge blocks see
// coordinate differences. XyzInvariant: coordinates are replaced by
// rotation-invariant scalar channels and alignment is forced to rixyz.
enum class NetMode { Standard, XyzInvariant };
const char* net_mode_name(NetMode mode);
NetMode net_mode_from_string(const std::string& name);

// How the per-direction embeddings are reduced before the global block:
// max keeps the block direction-permutation invariant, concat is the
// order-sensitive alternative.
enum class DirAggregation { Max, Concat };

// Rotation applied when augmenting at train time or perturbing at eval time.
enum class RotationScenario { None, Z, SO3 };
const char* rotation_name(RotationScenario rotation);
RotationScenario rotation_from_string(const std::string& name);
Mat3 random_rotation(RotationScenario rotation, SplitMix64& rng);

struct Layer {
  int in = 0;
  int out = 0;
  bool relu = true;
  std::vector<double> weight;  // [in][out]: weight[j * out + c]
  std::vector<double> bias;    // [out]

  size_t parameter_count() const { return weight.size() + bias.size(); }
};

struct Mlp {
  std::vector<Layer> layers;
  size_t parameter_count() const;
};

struct NetConfig {
  NetMode mode = NetMode::Standard;
  AlignMode align = AlignMode::None;
  DirAggregation aggregation = DirAggregation::Max;
  int class_count = 4;
  int edge_k = 32;

  // Cone bank geometry; empty alphas means the default pair (31.71/60 deg).
  int direction_level = 1;
  std::vector<int> ranks = {8, 16, 24, 32};
  std::vector<double> alphas_radians = {};

  // Layer widths.
  std::vector<int> odf_dir_widths = {32, 32};
  int odf_glob_width = 64;
  std::vector<int> edge_widths = {64, 128};
  int fuse_width = 256;
  std::vector<int> head_widths = {128, 64};
};

// The classifier: ODF block (per-direction MLP, direction aggregation, global
// MLP), two edge blocks over k nearest distinct neighbors, a fuse layer, a
// global max-pool over points, and a fully connected head.
class MiniOdfNet {
 public:
  // Deterministic random initialization from the seed.
  MiniOdfNet(NetConfig config, uint64_t seed);

  const NetConfig& config() const { return config_; }
  const ConeBank& bank() const { return bank_; }

  // MLPs in fixed serialization order.
  enum MlpIndex { kOdfDir = 0, kOdfGlob, kEdge1, kEdge2, kFuse, kHead, kMlpCount };
  Mlp& mlp(int i) { return mlps_[static_cast<size_t>(i)]; }
  const Mlp& mlp(int i) const { return mlps_[static_cast<size_t>(i)]; }

  size_t parameter_count() const;
  int base_width() const;       // per-point width entering the edge blocks
  int edge_geo_width() const;   // 3 coordinate diffs or 5 invariant scalars

 private:
  NetConfig config_;
  ConeBank bank_;
  std::vector<Mlp> mlps_;
};

// Gradient buffers shaped exactly like the net parameters.
struct Gradients {
  std::vector<Mlp> mlps;
  void zero();
};
Gradients make_gradients(const MiniOdfNet& net);

// Pointers to every parameter (or gradient) in one fixed order.
std::vector<double*> parameter_pointers(MiniOdfNet& net);
std::vector<double*> gradient_pointers(Gradients& grads);

// ODF descriptors for a cloud using the net's bank and alignment mode.
std::vector<double> net_odf_values(const MiniOdfNet& net, const PointCloud& cloud,
                                   int workers = 1);

// Class logits. `odf_values` is the point-major f64 layout produced by
// net_odf_values / odf_cloud_values. When `keep` is non-empty it masks which
// points participate in the final max-pool (half-deletion during training);
// all earlier stages always see the full cloud.
std::vector<double> classifier_forward(const MiniOdfNet& net,
                                       const PointCloud& cloud,
                                       const std::vector<double>& odf_values,
                                       const std::vector<uint8_t>& keep = {});

struct Sample {
  PointCloud cloud;
  std::vector<double> odf;
  int label = 0;
  std::vector<uint8_t> keep;  // optional pool mask
};

// Mean cross-entropy over the batch plus parameter gradients via manual
// reverse-mode differentiation. Per-sample gradients are reduced in sample
// order, so the result is bit-identical for any worker count.
double loss_and_grads(const MiniOdfNet& net, const std::vector<Sample>& batch,
                      Gradients* grads, int workers = 1);

struct AugmentConfig {
  bool scale = true;
  double scale_lo = 0.8;
  double scale_hi = 1.25;
  bool flip_xy = true;
  bool rot90 = true;
};

// Draw order per call: 3 scale factors (if scale), 2 flip coins (if flip_xy),
// 1 rotation pick (if rot90). Disabled switches draw nothing.
PointCloud augment(const PointCloud& cloud, const AugmentConfig& config,
                   SplitMix64& rng);

struct TrainConfig {
  int epochs = 12;
  int batch_size = 16;
  double learning_rate = 0.03;
  double momentum = 0.9;
  double grad_clip = 5.0;  // global gradient-norm ceiling; 0 disables clipping
  uint64_t seed = 29;
  AugmentConfig augment;
  bool half_deletion = true;
  RotationScenario rotation = RotationScenario::Z;
  int workers = 1;
  bool verbose = false;  // per-epoch progress on stderr
};

struct TrainResult {
  std::vector<double> epoch_loss;
};

// SGD with momentum; deterministic given the seed. Throws on divergence.
TrainResult train(MiniOdfNet& net, const Dataset& data, const TrainConfig& config);

std::vector<double> softmax(const std::vector<double>& logits);

// Single prediction on an already-normalized cloud.
std::vector<double> predict_logits(const MiniOdfNet& net, const PointCloud& cloud,
                                   int workers = 1);

struct VoteResult {
  int label = 0;
  std::vector<double> probabilities;
};

// Averages softmax outputs over `votes` randomly rescaled copies; ODFs are
// recomputed per copy. Draw order per vote: 3 scale factors.
VoteResult predict_with_voting(const MiniOdfNet& net, const PointCloud& cloud,
                               int votes, SplitMix64& rng, double scale_lo = 0.8,
                               double scale_hi = 1.25, int workers = 1);

struct EvalResult {
  double accuracy = 0.0;
  std::vector<int> predicted;
};

// Accuracy over a labeled set; each cloud is rotated by a seeded draw from the
// scenario first. votes == 1 is plain single-shot prediction.
EvalResult evaluate(const MiniOdfNet& net, const Dataset& test,
                    RotationScenario rotation, uint64_t seed, int votes = 1,
                    int workers = 1);

struct ContributionMap {
  std::vector<int> credits;  // per point; sums to the pooled feature width
  bool degenerate = false;   // every channel credited the same point
};

// Credits each global-feature channel to the point that wins its max-pool.
ContributionMap contribution_map(const MiniOdfNet& net, const PointCloud& cloud,
                                 const std::vector<double>& odf_values);

// Versioned binary checkpoint ("ODFM"), f32 little-endian parameters.
// Round trips are byte-exact.
void save_model(const MiniOdfNet& net, const std::string& path);
MiniOdfNet load_model(const std::string& path);

}  // namespace odfnet
