#include "odfnet/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <utility>

#include "odfnet/bytes.hpp"
#include "odfnet/error.hpp"
#include "odfnet/parallel.hpp"

namespace odfnet {
namespace {

// y = bias + W^T x, optionally relu. Weights are input-major so the inner
// loop runs over contiguous output slots; zero inputs (frequent after relu)
// contribute exactly nothing and are skipped.
void apply_layer(const Layer& layer, const double* x, double* y) {
  std::copy(layer.bias.begin(), layer.bias.end(), y);
  const int out = layer.out;
  for (int j = 0; j < layer.in; ++j) {
    const double xj = x[j];
    if (xj == 0.0) continue;
    const double* w = &layer.weight[static_cast<size_t>(j) * out];
    for (int c = 0; c < out; ++c) y[c] += xj * w[c];
  }
  if (layer.relu)
    for (int c = 0; c < out; ++c)
      if (y[c] < 0.0) y[c] = 0.0;
}

void mlp_forward_store(const Mlp& mlp, const double* x,
                       std::vector<std::vector<double>>& acts) {
  acts.resize(mlp.layers.size());
  const double* in = x;
  for (size_t i = 0; i < mlp.layers.size(); ++i) {
    acts[i].resize(static_cast<size_t>(mlp.layers[i].out));
    apply_layer(mlp.layers[i], in, acts[i].data());
    in = acts[i].data();
  }
}

// Reverse pass through a whole mlp. `dout` is consumed; gradients accumulate
// into `gmlp`; the gradient w.r.t. the input lands in `dx` when requested.
void mlp_backward(const Mlp& mlp, const double* x,
                  const std::vector<std::vector<double>>& acts,
                  std::vector<double> dout, Mlp& gmlp, std::vector<double>* dx) {
  for (int i = static_cast<int>(mlp.layers.size()) - 1; i >= 0; --i) {
    const Layer& layer = mlp.layers[static_cast<size_t>(i)];
    Layer& grad = gmlp.layers[static_cast<size_t>(i)];
    const std::vector<double>& out = acts[static_cast<size_t>(i)];
    if (layer.relu)
      for (int c = 0; c < layer.out; ++c)
        if (out[static_cast<size_t>(c)] <= 0.0) dout[static_cast<size_t>(c)] = 0.0;

    const double* in = i == 0 ? x : acts[static_cast<size_t>(i) - 1].data();
    for (int c = 0; c < layer.out; ++c) grad.bias[static_cast<size_t>(c)] += dout[static_cast<size_t>(c)];
    for (int j = 0; j < layer.in; ++j) {
      const double xj = in[j];
      if (xj == 0.0) continue;
      double* gw = &grad.weight[static_cast<size_t>(j) * layer.out];
      for (int c = 0; c < layer.out; ++c) gw[c] += xj * dout[static_cast<size_t>(c)];
    }
    if (i > 0 || dx) {
      std::vector<double> din(static_cast<size_t>(layer.in));
      for (int j = 0; j < layer.in; ++j) {
        const double* w = &layer.weight[static_cast<size_t>(j) * layer.out];
        double acc = 0.0;
        for (int c = 0; c < layer.out; ++c) acc += dout[static_cast<size_t>(c)] * w[c];
        din[static_cast<size_t>(j)] = acc;
      }
      if (i == 0)
        *dx = std::move(din);
      else
        dout = std::move(din);
    }
  }
}

int argmax_lowest(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[static_cast<size_t>(i)] > v[static_cast<size_t>(best)]) best = i;
  return best;
}

Layer random_layer(int in, int out, bool relu, SplitMix64& rng) {
  Layer layer;
  layer.in = in;
  layer.out = out;
  layer.relu = relu;
  layer.weight.resize(static_cast<size_t>(in) * static_cast<size_t>(out));
  layer.bias.resize(static_cast<size_t>(out));
  const double limit = std::sqrt(6.0 / in);
  for (double& w : layer.weight) w = rng.uniform(-limit, limit);
  // Nonzero bias init keeps zero-input units off the relu kink, which matters
  // for sparse descriptors (most directions see no neighbors at small ranks).
  const double bias_limit = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& b : layer.bias) b = rng.uniform(-bias_limit, bias_limit);
  return layer;
}

}  // namespace

const char* net_mode_name(NetMode mode) {
  return mode == NetMode::Standard ? "standard" : "xyz";
}

NetMode net_mode_from_string(const std::string& name) {
  if (name == "standard") return NetMode::Standard;
  if (name == "xyz") return NetMode::XyzInvariant;
  throw Error(ErrorKind::InvalidArgument,
              "unknown net mode '" + name + "' (standard|xyz)");
}

const char* rotation_name(RotationScenario rotation) {
  switch (rotation) {
    case RotationScenario::None: return "none";
    case RotationScenario::Z: return "z";
    case RotationScenario::SO3: return "so3";
  }
  return "unknown";
}

RotationScenario rotation_from_string(const std::string& name) {
  if (name == "none") return RotationScenario::None;
  if (name == "z") return RotationScenario::Z;
  if (name == "so3") return RotationScenario::SO3;
  throw Error(ErrorKind::InvalidArgument,
              "unknown rotation scenario '" + name + "' (none|z|so3)");
}

Mat3 random_rotation(RotationScenario rotation, SplitMix64& rng) {
  switch (rotation) {
    case RotationScenario::None:
      return Mat3::identity();
    case RotationScenario::Z:
      return Mat3::rotation_z(rng.uniform(0.0, 2.0 * std::numbers::pi_v<double>));
    case RotationScenario::SO3: {
      // Uniform rotation via a normalized Gaussian quaternion.
      double q[4];
      double norm2 = 0.0;
      do {
        norm2 = 0.0;
        for (double& qi : q) {
          qi = rng.normal();
          norm2 += qi * qi;
        }
      } while (norm2 < 1e-12);
      const double inv = 1.0 / std::sqrt(norm2);
      const double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;
      return Mat3{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
                   2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                   2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}};
    }
  }
  throw Error(ErrorKind::InvalidArgument, "bad rotation scenario");
}

size_t Mlp::parameter_count() const {
  size_t total = 0;
  for (const Layer& layer : layers) total += layer.parameter_count();
  return total;
}

MiniOdfNet::MiniOdfNet(NetConfig config, uint64_t seed) : config_(std::move(config)) {
  if (config_.class_count < 2)
    throw Error(ErrorKind::InvalidArgument, "need at least 2 classes");
  if (config_.edge_k < 1 || config_.edge_k > 255)
    throw Error(ErrorKind::InvalidArgument, "edge k must lie in [1, 255]");
  if (config_.odf_dir_widths.empty())
    throw Error(ErrorKind::InvalidArgument, "odf_dir needs at least one layer");
  if (config_.edge_widths.size() != 2)
    throw Error(ErrorKind::InvalidArgument, "expected exactly two edge blocks");
  for (int w : config_.odf_dir_widths)
    if (w < 1) throw Error(ErrorKind::InvalidArgument, "bad odf_dir width");
  for (int w : config_.edge_widths)
    if (w < 1) throw Error(ErrorKind::InvalidArgument, "bad edge width");
  for (int w : config_.head_widths)
    if (w < 1) throw Error(ErrorKind::InvalidArgument, "bad head width");
  if (config_.odf_glob_width < 1 || config_.fuse_width < 1)
    throw Error(ErrorKind::InvalidArgument, "bad feature width");
  if (config_.mode == NetMode::XyzInvariant) config_.align = AlignMode::RiXYZ;

  if (config_.alphas_radians.empty()) {
    constexpr double deg = std::numbers::pi_v<double> / 180.0;
    config_.alphas_radians = {31.71 * deg, 60.0 * deg};
  }
  bank_ = make_cone_bank(config_.direction_level, config_.ranks, config_.alphas_radians);

  SplitMix64 rng(derive_seed(seed, 0x6f64666e6574ull));
  mlps_.resize(kMlpCount);

  Mlp& odf_dir = mlps_[kOdfDir];
  int width = bank_.scales_per_direction();
  for (int w : config_.odf_dir_widths) {
    odf_dir.layers.push_back(random_layer(width, w, true, rng));
    width = w;
  }
  const int dir_out = width;
  const int glob_in = config_.aggregation == DirAggregation::Max
                          ? dir_out
                          : dir_out * bank_.direction_count();
  mlps_[kOdfGlob].layers.push_back(
      random_layer(glob_in, config_.odf_glob_width, true, rng));

  const int base = base_width();
  const int geo = edge_geo_width();
  mlps_[kEdge1].layers.push_back(
      random_layer(2 * base + geo, config_.edge_widths[0], true, rng));
  mlps_[kEdge2].layers.push_back(random_layer(
      2 * config_.edge_widths[0] + geo, config_.edge_widths[1], true, rng));

  const int fuse_in = base + config_.edge_widths[0] + config_.edge_widths[1] +
                      (config_.mode == NetMode::XyzInvariant ? 2 : 0);
  mlps_[kFuse].layers.push_back(random_layer(fuse_in, config_.fuse_width, true, rng));

  Mlp& head = mlps_[kHead];
  width = config_.fuse_width;
  for (int w : config_.head_widths) {
    head.layers.push_back(random_layer(width, w, true, rng));
    width = w;
  }
  head.layers.push_back(random_layer(width, config_.class_count, false, rng));
}

size_t MiniOdfNet::parameter_count() const {
  size_t total = 0;
  for (const Mlp& mlp : mlps_) total += mlp.parameter_count();
  return total;
}

int MiniOdfNet::base_width() const {
  return config_.odf_glob_width + (config_.mode == NetMode::Standard ? 3 : 0);
}

int MiniOdfNet::edge_geo_width() const {
  return config_.mode == NetMode::Standard ? 3 : 5;
}

void Gradients::zero() {
  for (Mlp& mlp : mlps)
    for (Layer& layer : mlp.layers) {
      std::fill(layer.weight.begin(), layer.weight.end(), 0.0);
      std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
}

Gradients make_gradients(const MiniOdfNet& net) {
  Gradients grads;
  grads.mlps.resize(MiniOdfNet::kMlpCount);
  for (int m = 0; m < MiniOdfNet::kMlpCount; ++m)
    for (const Layer& layer : net.mlp(m).layers) {
      Layer g;
      g.in = layer.in;
      g.out = layer.out;
      g.relu = layer.relu;
      g.weight.assign(layer.weight.size(), 0.0);
      g.bias.assign(layer.bias.size(), 0.0);
      grads.mlps[static_cast<size_t>(m)].layers.push_back(std::move(g));
    }
  return grads;
}

namespace {

template <typename MlpList>
std::vector<double*> collect_pointers(MlpList& mlps) {
  std::vector<double*> out;
  for (auto& mlp : mlps)
    for (auto& layer : mlp.layers) {
      for (double& w : layer.weight) out.push_back(&w);
      for (double& b : layer.bias) out.push_back(&b);
    }
  return out;
}

struct NetMlps {
  MiniOdfNet& net;
  struct Iter {
    MiniOdfNet& net;
    int i;
    Mlp& operator*() { return net.mlp(i); }
    void operator++() { ++i; }
    bool operator!=(const Iter& o) const { return i != o.i; }
  };
  Iter begin() { return {net, 0}; }
  Iter end() { return {net, MiniOdfNet::kMlpCount}; }
};

}  // namespace

std::vector<double*> parameter_pointers(MiniOdfNet& net) {
  NetMlps view{net};
  return collect_pointers(view);
}

std::vector<double*> gradient_pointers(Gradients& grads) {
  return collect_pointers(grads.mlps);
}

std::vector<double> net_odf_values(const MiniOdfNet& net, const PointCloud& cloud,
                                   int workers) {
  return odf_cloud_values(cloud, net.bank(), net.config().align, workers);
}

namespace {

// Cloud-derived geometry shared by forward and backward.
struct GeoCache {
  int n = 0;
  std::vector<std::vector<int>> neighbors;  // distinct-position edge neighbors
  std::vector<std::vector<double>> geo;     // per point: [slot * G + g]
  std::vector<double> coords;               // [n*3] aligned coords (standard)
  std::vector<double> chans;                // [n*2] invariant extras (xyz)
};

GeoCache build_geo(const MiniOdfNet& net, const PointCloud& cloud) {
  const NetConfig& cfg = net.config();
  const int n = static_cast<int>(cloud.size());
  if (n <= cfg.edge_k)
    throw Error(ErrorKind::InvalidArgument,
                "edge stage needs more than k=" + std::to_string(cfg.edge_k) +
                    " points, cloud has " + std::to_string(n));

  GeoCache geo;
  geo.n = n;
  geo.neighbors.resize(static_cast<size_t>(n));
  geo.geo.resize(static_cast<size_t>(n));

  const KnnIndex index(cloud);
  std::vector<Frame> frames;
  const bool standard = cfg.mode == NetMode::Standard;
  if (standard && cfg.align != AlignMode::None)
    frames = alignment_frames(cfg.align, cloud, index);

  if (standard) geo.coords.resize(static_cast<size_t>(n) * 3);
  if (!standard) geo.chans.resize(static_cast<size_t>(n) * 2);

  for (int p = 0; p < n; ++p) {
    const Vec3& xp = cloud.points[static_cast<size_t>(p)];
    NeighborList nl = index.knn_distinct(p, cfg.edge_k);
    auto& slots = geo.geo[static_cast<size_t>(p)];
    const int k = static_cast<int>(nl.size());
    geo.neighbors[static_cast<size_t>(p)] = nl.indices;

    if (standard) {
      const Frame frame = frames.empty() ? Frame{} : frames[static_cast<size_t>(p)];
      const Vec3 aligned = apply_frame(frame, xp);
      geo.coords[static_cast<size_t>(p) * 3 + 0] = aligned.x;
      geo.coords[static_cast<size_t>(p) * 3 + 1] = aligned.y;
      geo.coords[static_cast<size_t>(p) * 3 + 2] = aligned.z;
      slots.resize(static_cast<size_t>(k) * 3);
      for (int t = 0; t < k; ++t) {
        const Vec3& xq = cloud.points[static_cast<size_t>(nl.indices[t])];
        const Vec3 diff = apply_frame(frame, xp - xq);
        slots[static_cast<size_t>(t) * 3 + 0] = diff.x;
        slots[static_cast<size_t>(t) * 3 + 1] = diff.y;
        slots[static_cast<size_t>(t) * 3 + 2] = diff.z;
      }
    } else {
      // Rotation-invariant scalars, object center fixed at the origin
      // (clouds are unit-sphere normalized upstream).
      Vec3 local{0.0, 0.0, 0.0};
      for (int j : nl.indices) local = local + cloud.points[static_cast<size_t>(j)];
      local = local / static_cast<double>(k);
      const double dist_center = xp.norm();
      const double angle_center = angle_between(Vec3{} - xp, local - xp);
      geo.chans[static_cast<size_t>(p) * 2 + 0] = dist_center;
      geo.chans[static_cast<size_t>(p) * 2 + 1] = angle_center;
      slots.resize(static_cast<size_t>(k) * 5);
      for (int t = 0; t < k; ++t) {
        const Vec3& xq = cloud.points[static_cast<size_t>(nl.indices[t])];
        slots[static_cast<size_t>(t) * 5 + 0] = nl.distances[static_cast<size_t>(t)];
        slots[static_cast<size_t>(t) * 5 + 1] = dist_center;
        slots[static_cast<size_t>(t) * 5 + 2] = xq.norm();
        slots[static_cast<size_t>(t) * 5 + 3] = angle_between(xp, xq);
        slots[static_cast<size_t>(t) * 5 + 4] = angle_center;
      }
    }
  }
  return geo;
}

struct ForwardCache {
  int n = 0;
  std::vector<double> glob_in;   // [n * glob_in_width] (max-pooled or concat)
  std::vector<uint8_t> argdir;   // [n * dir_out] winning direction (max agg)
  std::vector<double> glob;      // [n * glob_width]
  std::vector<double> base;      // [n * base_width]
  std::vector<std::vector<double>> edge;   // per block: [n * width]
  std::vector<std::vector<uint8_t>> slot;  // per block: winning neighbor slot
  std::vector<double> fuse_in;   // [n * fuse_in_width]
  std::vector<double> fuse;      // [n * fuse_width]
  std::vector<double> pooled;    // [fuse_width]
  std::vector<int> argpoint;     // [fuse_width]
  std::vector<std::vector<double>> head_acts;
};

// One edge block: per pair relu(Wp f_p + Wq f_q + Wg geo + b), max over the
// neighbor slots. The per-point products Wp f_p and Wq f_q are hoisted out of
// the pair loop.
void edge_block_forward(const Layer& layer, int feat_width, int geo_width,
                        const GeoCache& geo, const std::vector<double>& feats,
                        std::vector<double>& out, std::vector<uint8_t>& slot) {
  const int n = geo.n;
  const int width = layer.out;
  out.assign(static_cast<size_t>(n) * width, 0.0);
  slot.assign(static_cast<size_t>(n) * width, 0);

  std::vector<double> up(static_cast<size_t>(n) * width);
  std::vector<double> vq(static_cast<size_t>(n) * width);
  for (int p = 0; p < n; ++p) {
    double* u = &up[static_cast<size_t>(p) * width];
    std::copy(layer.bias.begin(), layer.bias.end(), u);
    double* v = &vq[static_cast<size_t>(p) * width];
    std::fill(v, v + width, 0.0);
    const double* f = &feats[static_cast<size_t>(p) * feat_width];
    for (int j = 0; j < feat_width; ++j) {
      const double fj = f[j];
      if (fj == 0.0) continue;
      const double* wp = &layer.weight[static_cast<size_t>(j) * width];
      const double* wq =
          &layer.weight[(static_cast<size_t>(feat_width) + j) * width];
      for (int c = 0; c < width; ++c) u[c] += fj * wp[c];
      for (int c = 0; c < width; ++c) v[c] += fj * wq[c];
    }
  }

  std::vector<double> pre(static_cast<size_t>(width));
  for (int p = 0; p < n; ++p) {
    const auto& nbrs = geo.neighbors[static_cast<size_t>(p)];
    const auto& slots = geo.geo[static_cast<size_t>(p)];
    const double* u = &up[static_cast<size_t>(p) * width];
    double* dst = &out[static_cast<size_t>(p) * width];
    uint8_t* win = &slot[static_cast<size_t>(p) * width];
    for (int t = 0; t < static_cast<int>(nbrs.size()); ++t) {
      const double* v = &vq[static_cast<size_t>(nbrs[static_cast<size_t>(t)]) * width];
      for (int c = 0; c < width; ++c) pre[static_cast<size_t>(c)] = u[c] + v[c];
      const double* g = &slots[static_cast<size_t>(t) * geo_width];
      for (int gi = 0; gi < geo_width; ++gi) {
        const double gv = g[gi];
        if (gv == 0.0) continue;
        const double* wg =
            &layer.weight[(static_cast<size_t>(2 * feat_width) + gi) * width];
        for (int c = 0; c < width; ++c) pre[static_cast<size_t>(c)] += gv * wg[c];
      }
      if (t == 0) {
        for (int c = 0; c < width; ++c) {
          dst[c] = pre[static_cast<size_t>(c)] > 0.0 ? pre[static_cast<size_t>(c)] : 0.0;
          win[c] = 0;
        }
      } else {
        for (int c = 0; c < width; ++c) {
          const double val = pre[static_cast<size_t>(c)] > 0.0 ? pre[static_cast<size_t>(c)] : 0.0;
          if (val > dst[c]) {
            dst[c] = val;
            win[c] = static_cast<uint8_t>(t);
          }
        }
      }
    }
  }
}

void forward_sample(const MiniOdfNet& net, const std::vector<double>& odf,
                    const std::vector<uint8_t>& keep, const GeoCache& geo,
                    ForwardCache& fc, std::vector<double>& logits) {
  const NetConfig& cfg = net.config();
  const ConeBank& bank = net.bank();
  const int n = geo.n;
  const int dirs = bank.direction_count();
  const int scales = bank.scales_per_direction();
  if (odf.size() != static_cast<size_t>(n) * dirs * scales)
    throw Error(ErrorKind::InvalidArgument, "odf values do not match cloud/bank shape");
  if (!keep.empty() && keep.size() != static_cast<size_t>(n))
    throw Error(ErrorKind::InvalidArgument, "pool mask does not match cloud size");

  fc.n = n;
  const Mlp& odf_dir = net.mlp(MiniOdfNet::kOdfDir);
  const int dir_out = odf_dir.layers.back().out;
  const bool max_agg = cfg.aggregation == DirAggregation::Max;
  const int glob_in_width = net.mlp(MiniOdfNet::kOdfGlob).layers[0].in;

  fc.glob_in.assign(static_cast<size_t>(n) * glob_in_width, 0.0);
  if (max_agg) fc.argdir.assign(static_cast<size_t>(n) * dir_out, 0);
  std::vector<std::vector<double>> acts;
  for (int p = 0; p < n; ++p) {
    double* dst = &fc.glob_in[static_cast<size_t>(p) * glob_in_width];
    uint8_t* arg = max_agg ? &fc.argdir[static_cast<size_t>(p) * dir_out] : nullptr;
    for (int l = 0; l < dirs; ++l) {
      const double* slice = &odf[(static_cast<size_t>(p) * dirs + l) * scales];
      mlp_forward_store(odf_dir, slice, acts);
      const std::vector<double>& h = acts.back();
      if (max_agg) {
        if (l == 0) {
          for (int c = 0; c < dir_out; ++c) dst[c] = h[static_cast<size_t>(c)];
        } else {
          for (int c = 0; c < dir_out; ++c)
            if (h[static_cast<size_t>(c)] > dst[c]) {
              dst[c] = h[static_cast<size_t>(c)];
              arg[c] = static_cast<uint8_t>(l);
            }
        }
      } else {
        std::copy(h.begin(), h.end(), dst + static_cast<size_t>(l) * dir_out);
      }
    }
  }

  const Layer& glob_layer = net.mlp(MiniOdfNet::kOdfGlob).layers[0];
  const int glob_w = glob_layer.out;
  fc.glob.resize(static_cast<size_t>(n) * glob_w);
  for (int p = 0; p < n; ++p)
    apply_layer(glob_layer, &fc.glob_in[static_cast<size_t>(p) * glob_in_width],
                &fc.glob[static_cast<size_t>(p) * glob_w]);

  const int base_w = net.base_width();
  fc.base.resize(static_cast<size_t>(n) * base_w);
  for (int p = 0; p < n; ++p) {
    double* b = &fc.base[static_cast<size_t>(p) * base_w];
    std::copy(&fc.glob[static_cast<size_t>(p) * glob_w],
              &fc.glob[static_cast<size_t>(p) * glob_w] + glob_w, b);
    if (cfg.mode == NetMode::Standard)
      std::copy(&geo.coords[static_cast<size_t>(p) * 3],
                &geo.coords[static_cast<size_t>(p) * 3] + 3, b + glob_w);
  }

  const int geo_w = net.edge_geo_width();
  fc.edge.resize(2);
  fc.slot.resize(2);
  edge_block_forward(net.mlp(MiniOdfNet::kEdge1).layers[0], base_w, geo_w, geo,
                     fc.base, fc.edge[0], fc.slot[0]);
  edge_block_forward(net.mlp(MiniOdfNet::kEdge2).layers[0], cfg.edge_widths[0],
                     geo_w, geo, fc.edge[0], fc.edge[1], fc.slot[1]);

  const Layer& fuse_layer = net.mlp(MiniOdfNet::kFuse).layers[0];
  const int fuse_in_w = fuse_layer.in;
  const int fuse_w = fuse_layer.out;
  fc.fuse_in.resize(static_cast<size_t>(n) * fuse_in_w);
  fc.fuse.resize(static_cast<size_t>(n) * fuse_w);
  const int e1 = cfg.edge_widths[0], e2 = cfg.edge_widths[1];
  for (int p = 0; p < n; ++p) {
    double* in = &fc.fuse_in[static_cast<size_t>(p) * fuse_in_w];
    std::copy(&fc.base[static_cast<size_t>(p) * base_w],
              &fc.base[static_cast<size_t>(p) * base_w] + base_w, in);
    std::copy(&fc.edge[0][static_cast<size_t>(p) * e1],
              &fc.edge[0][static_cast<size_t>(p) * e1] + e1, in + base_w);
    std::copy(&fc.edge[1][static_cast<size_t>(p) * e2],
              &fc.edge[1][static_cast<size_t>(p) * e2] + e2, in + base_w + e1);
    if (cfg.mode == NetMode::XyzInvariant)
      std::copy(&geo.chans[static_cast<size_t>(p) * 2],
                &geo.chans[static_cast<size_t>(p) * 2] + 2, in + base_w + e1 + e2);
    apply_layer(fuse_layer, in, &fc.fuse[static_cast<size_t>(p) * fuse_w]);
  }

  fc.pooled.assign(static_cast<size_t>(fuse_w), 0.0);
  fc.argpoint.assign(static_cast<size_t>(fuse_w), -1);
  bool any = false;
  for (int p = 0; p < n; ++p) {
    if (!keep.empty() && !keep[static_cast<size_t>(p)]) continue;
    const double* f = &fc.fuse[static_cast<size_t>(p) * fuse_w];
    if (!any) {
      for (int c = 0; c < fuse_w; ++c) {
        fc.pooled[static_cast<size_t>(c)] = f[c];
        fc.argpoint[static_cast<size_t>(c)] = p;
      }
      any = true;
    } else {
      for (int c = 0; c < fuse_w; ++c)
        if (f[c] > fc.pooled[static_cast<size_t>(c)]) {
          fc.pooled[static_cast<size_t>(c)] = f[c];
          fc.argpoint[static_cast<size_t>(c)] = p;
        }
    }
  }
  if (!any) throw Error(ErrorKind::InvalidArgument, "pool mask removed every point");

  mlp_forward_store(net.mlp(MiniOdfNet::kHead), fc.pooled.data(), fc.head_acts);
  logits = fc.head_acts.back();
}

void backward_sample(const MiniOdfNet& net, const std::vector<double>& odf,
                     const GeoCache& geo, const ForwardCache& fc,
                     const std::vector<double>& dlogits, Gradients& grads) {
  const NetConfig& cfg = net.config();
  const int n = fc.n;

  // Head.
  std::vector<double> dpooled;
  mlp_backward(net.mlp(MiniOdfNet::kHead), fc.pooled.data(), fc.head_acts, dlogits,
               grads.mlps[MiniOdfNet::kHead], &dpooled);

  // Pool scatter: credit each channel's winning point.
  const Layer& fuse_layer = net.mlp(MiniOdfNet::kFuse).layers[0];
  Layer& fuse_grad = grads.mlps[MiniOdfNet::kFuse].layers[0];
  const int fuse_w = fuse_layer.out;
  const int fuse_in_w = fuse_layer.in;
  const int base_w = net.base_width();
  const int e1 = cfg.edge_widths[0], e2 = cfg.edge_widths[1];

  std::vector<double> dbase(static_cast<size_t>(n) * base_w, 0.0);
  std::vector<std::vector<double>> dedge(2);
  dedge[0].assign(static_cast<size_t>(n) * e1, 0.0);
  dedge[1].assign(static_cast<size_t>(n) * e2, 0.0);

  std::vector<std::vector<std::pair<int, double>>> winners(static_cast<size_t>(n));
  for (int c = 0; c < fuse_w; ++c) {
    const double g = dpooled[static_cast<size_t>(c)];
    if (g == 0.0) continue;
    winners[static_cast<size_t>(fc.argpoint[static_cast<size_t>(c)])].emplace_back(c, g);
  }
  std::vector<double> dfuse_in(static_cast<size_t>(fuse_in_w));
  for (int p = 0; p < n; ++p) {
    const auto& chan = winners[static_cast<size_t>(p)];
    if (chan.empty()) continue;
    std::fill(dfuse_in.begin(), dfuse_in.end(), 0.0);
    const double* in = &fc.fuse_in[static_cast<size_t>(p) * fuse_in_w];
    const double* out = &fc.fuse[static_cast<size_t>(p) * fuse_w];
    for (const auto& [c, g] : chan) {
      if (out[c] <= 0.0) continue;  // relu was inactive
      fuse_grad.bias[static_cast<size_t>(c)] += g;
      for (int j = 0; j < fuse_in_w; ++j) {
        fuse_grad.weight[static_cast<size_t>(j) * fuse_w + c] += in[j] * g;
        dfuse_in[static_cast<size_t>(j)] += g * fuse_layer.weight[static_cast<size_t>(j) * fuse_w + c];
      }
    }
    for (int j = 0; j < base_w; ++j)
      dbase[static_cast<size_t>(p) * base_w + j] += dfuse_in[static_cast<size_t>(j)];
    for (int j = 0; j < e1; ++j)
      dedge[0][static_cast<size_t>(p) * e1 + j] += dfuse_in[static_cast<size_t>(base_w + j)];
    for (int j = 0; j < e2; ++j)
      dedge[1][static_cast<size_t>(p) * e2 + j] += dfuse_in[static_cast<size_t>(base_w + e1 + j)];
    // Gradients into the invariant extras are geometric, not learnable.
  }

  // Edge blocks, deepest first. Each active (point, channel) credits the
  // winning neighbor pair.
  const int geo_w = net.edge_geo_width();
  for (int b = 1; b >= 0; --b) {
    const Layer& layer = net.mlp(b == 0 ? MiniOdfNet::kEdge1 : MiniOdfNet::kEdge2).layers[0];
    Layer& grad = grads.mlps[b == 0 ? MiniOdfNet::kEdge1 : MiniOdfNet::kEdge2].layers[0];
    const int width = layer.out;
    const int feat_w = b == 0 ? base_w : e1;
    const std::vector<double>& feats = b == 0 ? fc.base : fc.edge[0];
    std::vector<double>& dfeats = b == 0 ? dbase : dedge[0];
    const std::vector<double>& dout = dedge[static_cast<size_t>(b)];
    const std::vector<double>& out = fc.edge[static_cast<size_t>(b)];
    const std::vector<uint8_t>& slot = fc.slot[static_cast<size_t>(b)];

    for (int p = 0; p < n; ++p) {
      const auto& nbrs = geo.neighbors[static_cast<size_t>(p)];
      const auto& slots = geo.geo[static_cast<size_t>(p)];
      for (int c = 0; c < width; ++c) {
        const double g = dout[static_cast<size_t>(p) * width + c];
        if (g == 0.0) continue;
        if (out[static_cast<size_t>(p) * width + c] <= 0.0) continue;
        const int t = slot[static_cast<size_t>(p) * width + c];
        const int q = nbrs[static_cast<size_t>(t)];
        const double* fp = &feats[static_cast<size_t>(p) * feat_w];
        const double* fq = &feats[static_cast<size_t>(q) * feat_w];
        const double* gv = &slots[static_cast<size_t>(t) * geo_w];

        grad.bias[static_cast<size_t>(c)] += g;
        for (int j = 0; j < feat_w; ++j) {
          grad.weight[static_cast<size_t>(j) * width + c] += fp[j] * g;
          dfeats[static_cast<size_t>(p) * feat_w + j] +=
              g * layer.weight[static_cast<size_t>(j) * width + c];
        }
        for (int j = 0; j < feat_w; ++j) {
          grad.weight[(static_cast<size_t>(feat_w) + j) * width + c] += fq[j] * g;
          dfeats[static_cast<size_t>(q) * feat_w + j] +=
              g * layer.weight[(static_cast<size_t>(feat_w) + j) * width + c];
        }
        for (int gi = 0; gi < geo_w; ++gi)
          grad.weight[(static_cast<size_t>(2 * feat_w) + gi) * width + c] += gv[gi] * g;
      }
    }
  }

  // Global ODF mlp, then the per-direction mlp through the aggregation.
  const Layer& glob_layer = net.mlp(MiniOdfNet::kOdfGlob).layers[0];
  Layer& glob_grad = grads.mlps[MiniOdfNet::kOdfGlob].layers[0];
  const int glob_w = glob_layer.out;
  const int glob_in_w = glob_layer.in;
  const Mlp& odf_dir = net.mlp(MiniOdfNet::kOdfDir);
  const int dir_out = odf_dir.layers.back().out;
  const ConeBank& bank = net.bank();
  const int dirs = bank.direction_count();
  const int scales = bank.scales_per_direction();
  const bool max_agg = cfg.aggregation == DirAggregation::Max;

  std::vector<double> dglob_in(static_cast<size_t>(glob_in_w));
  std::vector<std::vector<double>> dir_acts;
  std::vector<std::vector<std::pair<int, double>>> per_dir(static_cast<size_t>(dirs));
  for (int p = 0; p < n; ++p) {
    const double* dg = &dbase[static_cast<size_t>(p) * base_w];
    bool active = false;
    for (int c = 0; c < glob_w; ++c)
      if (dg[c] != 0.0) {
        active = true;
        break;
      }
    if (!active) continue;

    const double* gout = &fc.glob[static_cast<size_t>(p) * glob_w];
    const double* gin = &fc.glob_in[static_cast<size_t>(p) * glob_in_w];
    std::fill(dglob_in.begin(), dglob_in.end(), 0.0);
    for (int c = 0; c < glob_w; ++c) {
      double g = dg[c];
      if (g == 0.0 || gout[c] <= 0.0) continue;
      glob_grad.bias[static_cast<size_t>(c)] += g;
      for (int j = 0; j < glob_in_w; ++j) {
        glob_grad.weight[static_cast<size_t>(j) * glob_w + c] += gin[j] * g;
        dglob_in[static_cast<size_t>(j)] += g * glob_layer.weight[static_cast<size_t>(j) * glob_w + c];
      }
    }

    if (max_agg) {
      for (auto& v : per_dir) v.clear();
      const uint8_t* arg = &fc.argdir[static_cast<size_t>(p) * dir_out];
      for (int j = 0; j < dir_out; ++j) {
        const double g = dglob_in[static_cast<size_t>(j)];
        if (g == 0.0) continue;
        // The winner's post-relu value is the pooled value itself.
        if (gin[j] <= 0.0) continue;
        per_dir[static_cast<size_t>(arg[j])].emplace_back(j, g);
      }
      for (int l = 0; l < dirs; ++l) {
        if (per_dir[static_cast<size_t>(l)].empty()) continue;
        const double* slice = &odf[(static_cast<size_t>(p) * dirs + l) * scales];
        mlp_forward_store(odf_dir, slice, dir_acts);
        std::vector<double> dh(static_cast<size_t>(dir_out), 0.0);
        for (const auto& [j, g] : per_dir[static_cast<size_t>(l)]) dh[static_cast<size_t>(j)] = g;
        mlp_backward(odf_dir, slice, dir_acts, std::move(dh),
                     grads.mlps[MiniOdfNet::kOdfDir], nullptr);
      }
    } else {
      for (int l = 0; l < dirs; ++l) {
        bool dir_active = false;
        for (int j = 0; j < dir_out; ++j)
          if (dglob_in[static_cast<size_t>(l * dir_out + j)] != 0.0) {
            dir_active = true;
            break;
          }
        if (!dir_active) continue;
        const double* slice = &odf[(static_cast<size_t>(p) * dirs + l) * scales];
        mlp_forward_store(odf_dir, slice, dir_acts);
        std::vector<double> dh(static_cast<size_t>(dir_out));
        for (int j = 0; j < dir_out; ++j)
          dh[static_cast<size_t>(j)] = dglob_in[static_cast<size_t>(l * dir_out + j)];
        mlp_backward(odf_dir, slice, dir_acts, std::move(dh),
                     grads.mlps[MiniOdfNet::kOdfDir], nullptr);
      }
    }
  }
}

}  // namespace

std::vector<double> classifier_forward(const MiniOdfNet& net, const PointCloud& cloud,
                                       const std::vector<double>& odf_values,
                                       const std::vector<uint8_t>& keep) {
  const GeoCache geo = build_geo(net, cloud);
  ForwardCache fc;
  std::vector<double> logits;
  forward_sample(net, odf_values, keep, geo, fc, logits);
  return logits;
}

double loss_and_grads(const MiniOdfNet& net, const std::vector<Sample>& batch,
                      Gradients* grads, int workers) {
  if (batch.empty()) throw Error(ErrorKind::InvalidArgument, "empty batch");
  if (!grads) throw Error(ErrorKind::InvalidArgument, "null gradient output");
  const int b = static_cast<int>(batch.size());
  const int classes = net.config().class_count;
  const double inv_b = 1.0 / b;

  std::vector<Gradients> sample_grads;
  sample_grads.reserve(static_cast<size_t>(b));
  for (int i = 0; i < b; ++i) sample_grads.push_back(make_gradients(net));
  std::vector<double> losses(static_cast<size_t>(b), 0.0);

  parallel_for(b, workers, [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      const Sample& s = batch[static_cast<size_t>(i)];
      if (s.label < 0 || s.label >= classes)
        throw Error(ErrorKind::InvalidArgument,
                    "label " + std::to_string(s.label) + " out of range at sample " +
                        std::to_string(i));
      std::vector<double> local_odf;
      const std::vector<double>* odf = &s.odf;
      if (s.odf.empty()) {
        local_odf = net_odf_values(net, s.cloud, 1);
        odf = &local_odf;
      }
      const GeoCache geo = build_geo(net, s.cloud);
      ForwardCache fc;
      std::vector<double> logits;
      forward_sample(net, *odf, s.keep, geo, fc, logits);

      const std::vector<double> probs = softmax(logits);
      const double loss = -std::log(probs[static_cast<size_t>(s.label)]);
      if (!std::isfinite(loss))
        throw Error(ErrorKind::Compute,
                    "non-finite loss at sample " + std::to_string(i));
      losses[static_cast<size_t>(i)] = loss;

      std::vector<double> dlogits(probs);
      dlogits[static_cast<size_t>(s.label)] -= 1.0;
      for (double& d : dlogits) d *= inv_b;
      backward_sample(net, *odf, geo, fc, dlogits, sample_grads[static_cast<size_t>(i)]);
    }
  });

  // Fixed reduction order keeps results bit-identical for any worker count.
  grads->zero();
  std::vector<double*> total = gradient_pointers(*grads);
  for (int i = 0; i < b; ++i) {
    std::vector<double*> part = gradient_pointers(sample_grads[static_cast<size_t>(i)]);
    for (size_t k = 0; k < total.size(); ++k) *total[k] += *part[k];
  }

  double loss = 0.0;
  for (double l : losses) loss += l;
  return loss * inv_b;
}

PointCloud augment(const PointCloud& cloud, const AugmentConfig& config,
                   SplitMix64& rng) {
  PointCloud out = cloud;
  if (config.scale) {
    if (!(config.scale_lo > 0.0) || config.scale_lo > config.scale_hi)
      throw Error(ErrorKind::InvalidArgument, "bad augmentation scale range");
    const double sx = rng.uniform(config.scale_lo, config.scale_hi);
    const double sy = rng.uniform(config.scale_lo, config.scale_hi);
    const double sz = rng.uniform(config.scale_lo, config.scale_hi);
    for (Vec3& p : out.points) {
      p.x *= sx;
      p.y *= sy;
      p.z *= sz;
    }
  }
  if (config.flip_xy) {
    if (rng.next_bool())
      for (Vec3& p : out.points) p.x = -p.x;
    if (rng.next_bool())
      for (Vec3& p : out.points) p.y = -p.y;
  }
  if (config.rot90) {
    // Quarter turns about z as exact coordinate swaps.
    switch (rng.uniform_index(4)) {
      case 1:
        for (Vec3& p : out.points) p = Vec3{-p.y, p.x, p.z};
        break;
      case 2:
        for (Vec3& p : out.points) p = Vec3{-p.x, -p.y, p.z};
        break;
      case 3:
        for (Vec3& p : out.points) p = Vec3{p.y, -p.x, p.z};
        break;
      default:
        break;
    }
  }
  return out;
}

TrainResult train(MiniOdfNet& net, const Dataset& data, const TrainConfig& config) {
  if (config.epochs < 1 || config.batch_size < 1)
    throw Error(ErrorKind::InvalidArgument, "epochs and batch size must be positive");
  if (!(config.learning_rate > 0.0))
    throw Error(ErrorKind::InvalidArgument, "learning rate must be positive");
  if (config.momentum < 0.0 || config.momentum >= 1.0)
    throw Error(ErrorKind::InvalidArgument, "momentum must lie in [0, 1)");
  if (config.grad_clip < 0.0)
    throw Error(ErrorKind::InvalidArgument, "gradient clip must be >= 0");
  if (data.clouds.empty())
    throw Error(ErrorKind::InvalidArgument, "empty training set");
  for (const PointCloud& cloud : data.clouds)
    if (cloud.label < 0 || cloud.label >= net.config().class_count)
      throw Error(ErrorKind::InvalidArgument, "dataset label out of range for net");

  const int n = static_cast<int>(data.clouds.size());
  SplitMix64 rng(derive_seed(config.seed, 0x747261696eull));
  Gradients grads = make_gradients(net);
  Gradients velocity = make_gradients(net);
  std::vector<double*> params = parameter_pointers(net);
  std::vector<double*> gptr = gradient_pointers(grads);
  std::vector<double*> vptr = gradient_pointers(velocity);

  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

  TrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(i) + 1));
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }

    double epoch_loss = 0.0;
    int seen = 0;
    for (int start = 0; start < n; start += config.batch_size) {
      const int stop = std::min(n, start + config.batch_size);
      std::vector<Sample> batch;
      batch.reserve(static_cast<size_t>(stop - start));
      for (int i = start; i < stop; ++i) {
        const PointCloud& src = data.clouds[static_cast<size_t>(order[static_cast<size_t>(i)])];
        Sample s;
        s.cloud = augment(src, config.augment, rng);
        if (config.rotation != RotationScenario::None)
          s.cloud = rotated(s.cloud, random_rotation(config.rotation, rng));
        s.label = src.label;
        if (config.half_deletion) {
          const int m = static_cast<int>(s.cloud.size());
          const int keep_count = m - m / 2;
          std::vector<int> idx(static_cast<size_t>(m));
          for (int p = 0; p < m; ++p) idx[static_cast<size_t>(p)] = p;
          s.keep.assign(static_cast<size_t>(m), 0);
          for (int p = 0; p < keep_count; ++p) {
            const int j = p + static_cast<int>(rng.uniform_index(static_cast<uint64_t>(m - p)));
            std::swap(idx[static_cast<size_t>(p)], idx[static_cast<size_t>(j)]);
            s.keep[static_cast<size_t>(idx[static_cast<size_t>(p)])] = 1;
          }
        }
        batch.push_back(std::move(s));
      }

      const double loss = loss_and_grads(net, batch, &grads, config.workers);
      epoch_loss += loss * static_cast<double>(batch.size());
      seen += static_cast<int>(batch.size());

      if (config.grad_clip > 0.0) {
        double norm_sq = 0.0;
        for (double* g : gptr) norm_sq += *g * *g;
        if (norm_sq > config.grad_clip * config.grad_clip) {
          const double scale = config.grad_clip / std::sqrt(norm_sq);
          for (double* g : gptr) *g *= scale;
        }
      }

      for (size_t k = 0; k < params.size(); ++k) {
        *vptr[k] = config.momentum * *vptr[k] - config.learning_rate * *gptr[k];
        *params[k] += *vptr[k];
      }
    }
    epoch_loss /= seen;
    if (!std::isfinite(epoch_loss))
      throw Error(ErrorKind::Compute,
                  "training diverged at epoch " + std::to_string(epoch));
    result.epoch_loss.push_back(epoch_loss);
    if (config.verbose)
      std::fprintf(stderr, "epoch %d/%d loss %.6f\n", epoch + 1, config.epochs,
                   epoch_loss);
  }
  return result;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw Error(ErrorKind::InvalidArgument, "empty logits");
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

std::vector<double> predict_logits(const MiniOdfNet& net, const PointCloud& cloud,
                                   int workers) {
  return classifier_forward(net, cloud, net_odf_values(net, cloud, workers));
}

VoteResult predict_with_voting(const MiniOdfNet& net, const PointCloud& cloud,
                               int votes, SplitMix64& rng, double scale_lo,
                               double scale_hi, int workers) {
  if (votes < 1) throw Error(ErrorKind::InvalidArgument, "votes must be >= 1");
  if (!(scale_lo > 0.0) || scale_lo > scale_hi)
    throw Error(ErrorKind::InvalidArgument, "bad voting scale range");

  VoteResult result;
  result.probabilities.assign(static_cast<size_t>(net.config().class_count), 0.0);
  for (int v = 0; v < votes; ++v) {
    const double sx = rng.uniform(scale_lo, scale_hi);
    const double sy = rng.uniform(scale_lo, scale_hi);
    const double sz = rng.uniform(scale_lo, scale_hi);
    PointCloud copy = cloud;
    for (Vec3& p : copy.points) {
      p.x *= sx;
      p.y *= sy;
      p.z *= sz;
    }
    const std::vector<double> probs = softmax(predict_logits(net, copy, workers));
    for (size_t i = 0; i < probs.size(); ++i) result.probabilities[i] += probs[i];
  }
  for (double& p : result.probabilities) p /= votes;
  result.label = argmax_lowest(result.probabilities);
  return result;
}

EvalResult evaluate(const MiniOdfNet& net, const Dataset& test,
                    RotationScenario rotation, uint64_t seed, int votes,
                    int workers) {
  if (test.clouds.empty())
    throw Error(ErrorKind::InvalidArgument, "empty evaluation set");
  EvalResult result;
  result.predicted.resize(test.clouds.size());
  int correct = 0;
  for (size_t i = 0; i < test.clouds.size(); ++i) {
    SplitMix64 rng(derive_seed(seed, i));
    PointCloud cloud = test.clouds[i];
    if (rotation != RotationScenario::None)
      cloud = rotated(cloud, random_rotation(rotation, rng));
    int label;
    if (votes <= 1) {
      label = argmax_lowest(predict_logits(net, cloud, workers));
    } else {
      label = predict_with_voting(net, cloud, votes, rng, 0.8, 1.25, workers).label;
    }
    result.predicted[i] = label;
    if (label == test.clouds[i].label) ++correct;
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(test.clouds.size());
  return result;
}

ContributionMap contribution_map(const MiniOdfNet& net, const PointCloud& cloud,
                                 const std::vector<double>& odf_values) {
  const GeoCache geo = build_geo(net, cloud);
  ForwardCache fc;
  std::vector<double> logits;
  forward_sample(net, odf_values, {}, geo, fc, logits);

  ContributionMap map;
  map.credits.assign(cloud.size(), 0);
  bool all_same = true;
  for (size_t c = 0; c < fc.argpoint.size(); ++c) {
    ++map.credits[static_cast<size_t>(fc.argpoint[c])];
    if (fc.argpoint[c] != fc.argpoint[0]) all_same = false;
  }
  map.degenerate = all_same && fc.argpoint.size() > 1;
  return map;
}

void save_model(const MiniOdfNet& net, const std::string& path) {
  const NetConfig& cfg = net.config();
  std::vector<uint8_t> bytes;
  bytes.insert(bytes.end(), {'O', 'D', 'F', 'M'});
  put_u32(bytes, 1);
  bytes.push_back(static_cast<uint8_t>(cfg.mode));
  bytes.push_back(static_cast<uint8_t>(cfg.align));
  bytes.push_back(static_cast<uint8_t>(cfg.aggregation));
  bytes.push_back(0);
  put_u32(bytes, static_cast<uint32_t>(cfg.class_count));
  put_u32(bytes, static_cast<uint32_t>(cfg.edge_k));
  put_u32(bytes, static_cast<uint32_t>(cfg.direction_level));
  put_u32(bytes, static_cast<uint32_t>(cfg.ranks.size()));
  for (int r : cfg.ranks) put_u32(bytes, static_cast<uint32_t>(r));
  put_u32(bytes, static_cast<uint32_t>(cfg.alphas_radians.size()));
  for (double a : cfg.alphas_radians) put_f64(bytes, a);

  put_u32(bytes, MiniOdfNet::kMlpCount);
  for (int m = 0; m < MiniOdfNet::kMlpCount; ++m) {
    const Mlp& mlp = net.mlp(m);
    put_u32(bytes, static_cast<uint32_t>(mlp.layers.size()));
    for (const Layer& layer : mlp.layers) {
      put_u32(bytes, static_cast<uint32_t>(layer.in));
      put_u32(bytes, static_cast<uint32_t>(layer.out));
      bytes.push_back(layer.relu ? 1 : 0);
    }
  }
  for (int m = 0; m < MiniOdfNet::kMlpCount; ++m)
    for (const Layer& layer : net.mlp(m).layers) {
      for (double w : layer.weight) put_f32(bytes, static_cast<float>(w));
      for (double b : layer.bias) put_f32(bytes, static_cast<float>(b));
    }
  write_file_bytes(path, bytes);
}

MiniOdfNet load_model(const std::string& path) {
  ByteReader r(path, read_file_bytes(path));
  auto fail_at = [&](size_t offset, const std::string& message) -> void {
    throw Error(ErrorKind::Parse,
                path + ": offset " + std::to_string(offset) + ": " + message);
  };

  uint8_t magic[4];
  r.get_bytes(magic, 4, "magic");
  if (magic[0] != 'O' || magic[1] != 'D' || magic[2] != 'F' || magic[3] != 'M')
    fail_at(0, "bad magic (expected ODFM)");
  size_t off = r.offset();
  const uint32_t version = r.get_u32("format version");
  if (version != 1) fail_at(off, "unsupported format version " + std::to_string(version));

  NetConfig cfg;
  off = r.offset();
  const uint8_t mode = r.get_u8("mode");
  if (mode > 1) fail_at(off, "bad mode " + std::to_string(mode));
  cfg.mode = static_cast<NetMode>(mode);
  off = r.offset();
  const uint8_t align = r.get_u8("alignment mode");
  if (align > 2) fail_at(off, "bad alignment mode " + std::to_string(align));
  cfg.align = static_cast<AlignMode>(align);
  off = r.offset();
  const uint8_t agg = r.get_u8("aggregation");
  if (agg > 1) fail_at(off, "bad aggregation " + std::to_string(agg));
  cfg.aggregation = static_cast<DirAggregation>(agg);
  off = r.offset();
  if (r.get_u8("reserved byte") != 0) fail_at(off, "reserved byte must be zero");

  off = r.offset();
  cfg.class_count = static_cast<int>(r.get_u32("class count"));
  if (cfg.class_count < 2 || cfg.class_count > 4096) fail_at(off, "bad class count");
  off = r.offset();
  cfg.edge_k = static_cast<int>(r.get_u32("edge k"));
  if (cfg.edge_k < 1 || cfg.edge_k > 255) fail_at(off, "bad edge k");
  off = r.offset();
  cfg.direction_level = static_cast<int>(r.get_u32("direction level"));
  if (cfg.direction_level < 0 || cfg.direction_level > 5)
    fail_at(off, "bad direction level");

  off = r.offset();
  const uint32_t rank_count = r.get_u32("rank count");
  if (rank_count < 1 || rank_count > 64) fail_at(off, "bad rank count");
  cfg.ranks.clear();
  for (uint32_t i = 0; i < rank_count; ++i) {
    off = r.offset();
    const uint32_t rank = r.get_u32("rank");
    if (rank < 1 || rank > 4096) fail_at(off, "bad rank");
    if (!cfg.ranks.empty() && static_cast<int>(rank) <= cfg.ranks.back())
      fail_at(off, "ranks must be strictly ascending");
    cfg.ranks.push_back(static_cast<int>(rank));
  }
  off = r.offset();
  const uint32_t alpha_count = r.get_u32("alpha count");
  if (alpha_count < 1 || alpha_count > 64) fail_at(off, "bad alpha count");
  cfg.alphas_radians.clear();
  for (uint32_t i = 0; i < alpha_count; ++i) {
    off = r.offset();
    const double a = r.get_f64("alpha");
    if (!(a > 0.0) || a > std::numbers::pi_v<double>) fail_at(off, "bad half-angle");
    cfg.alphas_radians.push_back(a);
  }

  off = r.offset();
  if (r.get_u32("mlp count") != MiniOdfNet::kMlpCount) fail_at(off, "bad mlp count");
  struct Shape {
    uint32_t in, out;
    uint8_t relu;
  };
  std::vector<std::vector<Shape>> shapes(MiniOdfNet::kMlpCount);
  for (auto& mlp_shapes : shapes) {
    off = r.offset();
    const uint32_t layers = r.get_u32("layer count");
    if (layers < 1 || layers > 64) fail_at(off, "bad layer count");
    for (uint32_t i = 0; i < layers; ++i) {
      Shape s{};
      off = r.offset();
      s.in = r.get_u32("layer input width");
      s.out = r.get_u32("layer output width");
      s.relu = r.get_u8("layer activation");
      if (s.in < 1 || s.in > 1u << 20 || s.out < 1 || s.out > 1u << 20 || s.relu > 1)
        fail_at(off, "bad layer shape");
      mlp_shapes.push_back(s);
    }
  }

  // Reconstruct the width configuration from the shape table, then verify the
  // table chains exactly like a net built from that configuration.
  cfg.odf_dir_widths.clear();
  for (const Shape& s : shapes[MiniOdfNet::kOdfDir])
    cfg.odf_dir_widths.push_back(static_cast<int>(s.out));
  if (shapes[MiniOdfNet::kOdfGlob].size() != 1 ||
      shapes[MiniOdfNet::kEdge1].size() != 1 || shapes[MiniOdfNet::kEdge2].size() != 1 ||
      shapes[MiniOdfNet::kFuse].size() != 1)
    throw Error(ErrorKind::Parse, path + ": unexpected multi-layer block in shape table");
  cfg.odf_glob_width = static_cast<int>(shapes[MiniOdfNet::kOdfGlob][0].out);
  cfg.edge_widths = {static_cast<int>(shapes[MiniOdfNet::kEdge1][0].out),
                     static_cast<int>(shapes[MiniOdfNet::kEdge2][0].out)};
  cfg.fuse_width = static_cast<int>(shapes[MiniOdfNet::kFuse][0].out);
  cfg.head_widths.clear();
  const auto& head_shapes = shapes[MiniOdfNet::kHead];
  for (size_t i = 0; i + 1 < head_shapes.size(); ++i)
    cfg.head_widths.push_back(static_cast<int>(head_shapes[i].out));
  if (static_cast<int>(head_shapes.back().out) != cfg.class_count)
    throw Error(ErrorKind::Parse, path + ": head output does not match class count");

  MiniOdfNet net(cfg, 0);
  for (int m = 0; m < MiniOdfNet::kMlpCount; ++m) {
    const auto& mlp_shapes = shapes[static_cast<size_t>(m)];
    const Mlp& built = net.mlp(m);
    if (built.layers.size() != mlp_shapes.size())
      throw Error(ErrorKind::Parse, path + ": shape table does not chain");
    for (size_t i = 0; i < mlp_shapes.size(); ++i)
      if (static_cast<int>(mlp_shapes[i].in) != built.layers[i].in ||
          static_cast<int>(mlp_shapes[i].out) != built.layers[i].out ||
          (mlp_shapes[i].relu != 0) != built.layers[i].relu)
        throw Error(ErrorKind::Parse, path + ": shape table does not chain");
  }

  for (int m = 0; m < MiniOdfNet::kMlpCount; ++m)
    for (Layer& layer : net.mlp(m).layers) {
      for (double& w : layer.weight) {
        off = r.offset();
        w = static_cast<double>(r.get_f32("weight"));
        if (!std::isfinite(w)) fail_at(off, "non-finite parameter");
      }
      for (double& b : layer.bias) {
        off = r.offset();
        b = static_cast<double>(r.get_f32("bias"));
        if (!std::isfinite(b)) fail_at(off, "non-finite parameter");
      }
    }
  r.expect_end();
  return net;
}

}  // namespace odfnet
