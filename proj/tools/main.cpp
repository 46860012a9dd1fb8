// odfnet command-line front end. Talks to the library exclusively through the
// C interface in odfnet/odfnet.h.
//
// Exit codes: 0 success, 1 validation error (bad flags or unparsable input),
// 2 computation failure. Experiment tables go to stdout as CSV; the config
// echo, progress and error lines go to stderr.

#include <chrono>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "odfnet/odfnet.h"

namespace {

struct Failure {
  odfnet_status status;
};

void check(odfnet_status status) {
  if (status != ODFNET_OK) throw Failure{status};
}

const char* status_name(odfnet_status status) {
  switch (status) {
    case ODFNET_OK: return "ok";
    case ODFNET_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case ODFNET_ERR_PARSE: return "parse";
    case ODFNET_ERR_IO: return "io";
    case ODFNET_ERR_DEGENERATE: return "degenerate";
    case ODFNET_ERR_COMPUTE: return "compute";
  }
  return "unknown";
}

int exit_code(odfnet_status status) {
  switch (status) {
    case ODFNET_OK: return 0;
    case ODFNET_ERR_INVALID_ARGUMENT:
    case ODFNET_ERR_PARSE: return 1;
    default: return 2;
  }
}

struct CloudDel { void operator()(odfnet_cloud* p) const { odfnet_cloud_destroy(p); } };
struct DirsDel { void operator()(odfnet_directions* p) const { odfnet_directions_destroy(p); } };
struct FieldDel { void operator()(odfnet_field* p) const { odfnet_field_destroy(p); } };
struct DataDel { void operator()(odfnet_dataset* p) const { odfnet_dataset_destroy(p); } };
struct ModelDel { void operator()(odfnet_model* p) const { odfnet_model_destroy(p); } };

using CloudPtr = std::unique_ptr<odfnet_cloud, CloudDel>;
using DirsPtr = std::unique_ptr<odfnet_directions, DirsDel>;
using FieldPtr = std::unique_ptr<odfnet_field, FieldDel>;
using DataPtr = std::unique_ptr<odfnet_dataset, DataDel>;
using ModelPtr = std::unique_ptr<odfnet_model, ModelDel>;

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                   start)
      .count();
}

// Shared option state.
struct Options {
  uint64_t seed = 29;
  int workers = 0;  // 0 = ODF_WORKERS or hardware default
  bool verbose = false;

  // feature extraction flags
  std::string in_path;
  std::string out_path;
  int level = 1;
  std::string ranks = "8,16,24,32";
  std::string alphas_deg = "31.71,60";
  std::string align = "none";

  // dataset flags
  std::string dataset;
  int per_class = 100;
  int points = 512;
  double sigma = 0.02;
  std::string split = "test";

  // model flags
  std::string mode = "standard";
  std::string train_align = "rixy";
  std::string rotation = "z";
  std::string ckpt;
  std::string ckpt_so3;
  int epochs = 12;
  int batch = 16;
  double lr = 0.03;
  double momentum = 0.9;
  bool no_augment = false;
  bool no_half_deletion = false;
  int votes = 1;

  // oracle / bench flags
  int seeds = 20;
  int max_points = 256;
  bool perturb = false;
  int repeats = 3;
  int bench_points = 1024;

  // glyph flags
  std::string select;
  double glyph_scale = 0.1;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      items.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  items.push_back(cur);
  return items;
}

std::vector<int32_t> parse_int_list(const std::string& text, const char* what) {
  std::vector<int32_t> out;
  for (const std::string& item : split_list(text)) {
    try {
      size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw CLI::ValidationError(std::string(what) + ": bad integer '" + item + "'");
    }
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
  std::vector<double> out;
  for (const std::string& item : split_list(text)) {
    try {
      size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw CLI::ValidationError(std::string(what) + ": bad number '" + item + "'");
    }
  }
  return out;
}

int parse_align(const std::string& name) {
  if (name == "none") return ODFNET_ALIGN_NONE;
  if (name == "rixy") return ODFNET_ALIGN_RIXY;
  if (name == "rixyz") return ODFNET_ALIGN_RIXYZ;
  throw CLI::ValidationError("--align must be none, rixy or rixyz");
}

int parse_rotation(const std::string& name) {
  if (name == "none") return ODFNET_ROTATION_NONE;
  if (name == "z") return ODFNET_ROTATION_Z;
  if (name == "so3") return ODFNET_ROTATION_SO3;
  throw CLI::ValidationError("--rotation must be none, z or so3");
}

int parse_mode(const std::string& name) {
  if (name == "standard") return ODFNET_MODE_STANDARD;
  if (name == "xyz") return ODFNET_MODE_XYZ;
  throw CLI::ValidationError("--mode must be standard or xyz");
}

// Bank config plus backing storage for the list flags.
struct BankFlags {
  std::vector<int32_t> ranks;
  std::vector<double> alphas;
  odfnet_bank_config config{};

  BankFlags(const Options& opt) {
    ranks = parse_int_list(opt.ranks, "--ranks");
    alphas = parse_double_list(opt.alphas_deg, "--alphas-deg");
    for (double& a : alphas) a *= 3.14159265358979323846 / 180.0;
    odfnet_bank_config_init(&config);
    config.direction_level = opt.level;
    config.ranks = ranks.data();
    config.rank_count = ranks.size();
    config.alphas_radians = alphas.data();
    config.alpha_count = alphas.size();
    config.align = parse_align(opt.align);
  }

  size_t cones() const {
    size_t dirs = 12;
    for (int l = 0; l < config.direction_level; ++l) dirs = 4 * dirs - 6;
    return dirs * ranks.size() * alphas.size();
  }
};

CloudPtr load_normalized_cloud(const std::string& path) {
  odfnet_cloud* raw = nullptr;
  check(odfnet_cloud_load(path.c_str(), &raw));
  CloudPtr cloud(raw);
  check(odfnet_cloud_normalize(cloud.get()));
  return cloud;
}

DataPtr make_dataset(const Options& opt) {
  odfnet_dataset* raw = nullptr;
  if (opt.dataset == "synth") {
    check(odfnet_dataset_synthetic(opt.per_class, opt.points, opt.sigma, opt.seed,
                                   &raw));
  } else {
    check(odfnet_dataset_load_dir(opt.dataset.c_str(), &raw));
  }
  return DataPtr(raw);
}

DataPtr dataset_part(const DataPtr& all, const std::string& split) {
  odfnet_dataset* train = nullptr;
  odfnet_dataset* test = nullptr;
  check(odfnet_dataset_split(all.get(), &train, &test));
  DataPtr train_ptr(train), test_ptr(test);
  return split == "train" ? std::move(train_ptr) : std::move(test_ptr);
}

void echo(const Options& opt, const std::string& cmd, const std::string& extra) {
  std::fprintf(stderr, "config: cmd=%s seed=%" PRIu64 " workers=%d%s%s\n",
               cmd.c_str(), opt.seed,
               opt.workers > 0 ? opt.workers : odfnet_default_workers(),
               extra.empty() ? "" : " ", extra.c_str());
}

int cmd_directions(const Options& opt) {
  echo(opt, "directions",
       "level=" + std::to_string(opt.level) + " out=" + opt.out_path);
  odfnet_directions* raw = nullptr;
  check(odfnet_directions_create(opt.level, &raw));
  DirsPtr dirs(raw);
  const size_t count = odfnet_directions_count(dirs.get());
  std::vector<double> xyz(3 * count);
  check(odfnet_directions_get(dirs.get(), xyz.data()));

  odfnet_cloud* cloud_raw = nullptr;
  check(odfnet_cloud_create(xyz.data(), count, &cloud_raw));
  CloudPtr cloud(cloud_raw);
  check(odfnet_cloud_save_xyz(cloud.get(), opt.out_path.c_str()));

  std::printf("level,count\n%d,%zu\n", opt.level, count);
  return 0;
}

int cmd_features(const Options& opt) {
  BankFlags bank(opt);
  echo(opt, "features",
       "in=" + opt.in_path + " align=" + opt.align + " level=" +
           std::to_string(opt.level) + " ranks=" + opt.ranks + " alphas-deg=" +
           opt.alphas_deg + " out=" + opt.out_path);

  CloudPtr cloud = load_normalized_cloud(opt.in_path);
  const auto start = std::chrono::steady_clock::now();
  odfnet_field* raw = nullptr;
  check(odfnet_field_compute(cloud.get(), &bank.config, opt.workers, &raw));
  const double ms = elapsed_ms(start);
  FieldPtr field(raw);
  check(odfnet_field_save(field.get(), opt.out_path.c_str()));

  std::printf("points,directions,scales,cones,elapsed_ms\n");
  std::printf("%zu,%zu,%zu,%zu,%.3f\n", odfnet_field_points(field.get()),
              odfnet_field_directions(field.get()),
              odfnet_field_scales(field.get()),
              odfnet_field_directions(field.get()) * odfnet_field_scales(field.get()),
              ms);
  return 0;
}

int cmd_oracle_check(const Options& opt) {
  BankFlags bank(opt);
  echo(opt, "oracle-check",
       "seeds=" + std::to_string(opt.seeds) + " max-points=" +
           std::to_string(opt.max_points) + " cones=" + std::to_string(bank.cones()) +
           (opt.perturb ? " perturb=1" : ""));
  if (opt.seeds < 1) throw CLI::ValidationError("--seeds must be positive");
  if (opt.max_points < 33)
    throw CLI::ValidationError("--max-points must be at least 33");

  std::printf("seed,points,cones,status,point,cone\n");
  bool all_ok = true;
  for (int i = 0; i < opt.seeds; ++i) {
    const uint64_t seed = opt.seed + static_cast<uint64_t>(i);
    const int points = 33 + static_cast<int>((static_cast<int64_t>(i) * 7919) %
                                             (opt.max_points - 32));
    int64_t point = -1, cone = -1;
    const odfnet_status rc = odfnet_oracle_check(seed, points, &bank.config,
                                                 opt.perturb ? 1 : 0, &point, &cone);
    if (rc == ODFNET_OK) {
      std::printf("%" PRIu64 ",%d,%zu,ok,-1,-1\n", seed, points, bank.cones());
    } else if (rc == ODFNET_ERR_COMPUTE && point >= 0) {
      std::printf("%" PRIu64 ",%d,%zu,mismatch,%" PRId64 ",%" PRId64 "\n", seed,
                  points, bank.cones(), point, cone);
      all_ok = false;
    } else {
      throw Failure{rc};
    }
  }
  if (!all_ok) {
    std::fprintf(stderr, "error: compute: descriptor oracle mismatch\n");
    return 2;
  }
  return 0;
}

ModelPtr load_model(const std::string& path) {
  odfnet_model* raw = nullptr;
  check(odfnet_model_load(path.c_str(), &raw));
  return ModelPtr(raw);
}

int cmd_train(const Options& opt) {
  echo(opt, "train",
       "dataset=" + opt.dataset + " mode=" + opt.mode + " align=" +
           opt.train_align + " rotation=" + opt.rotation + " epochs=" +
           std::to_string(opt.epochs) + " batch=" + std::to_string(opt.batch) +
           " ckpt=" + opt.ckpt);

  DataPtr all = make_dataset(opt);
  DataPtr train_split = dataset_part(all, "train");

  odfnet_net_config net_cfg;
  odfnet_net_config_init(&net_cfg);
  net_cfg.mode = parse_mode(opt.mode);
  net_cfg.align = parse_align(opt.train_align);
  net_cfg.class_count = odfnet_dataset_class_count(all.get());
  odfnet_model* raw = nullptr;
  check(odfnet_model_create(&net_cfg, opt.seed, &raw));
  ModelPtr model(raw);

  odfnet_train_config train_cfg;
  odfnet_train_config_init(&train_cfg);
  train_cfg.epochs = opt.epochs;
  train_cfg.batch_size = opt.batch;
  train_cfg.learning_rate = opt.lr;
  train_cfg.momentum = opt.momentum;
  train_cfg.seed = opt.seed;
  train_cfg.rotation = parse_rotation(opt.rotation);
  train_cfg.augment = opt.no_augment ? 0 : 1;
  train_cfg.half_deletion = opt.no_half_deletion ? 0 : 1;
  train_cfg.workers = opt.workers;
  train_cfg.verbose = opt.verbose ? 1 : 0;

  std::vector<double> losses(static_cast<size_t>(opt.epochs > 0 ? opt.epochs : 0));
  check(odfnet_model_train(model.get(), train_split.get(), &train_cfg,
                           losses.data()));
  check(odfnet_model_save(model.get(), opt.ckpt.c_str()));

  std::printf("epoch,loss\n");
  for (size_t e = 0; e < losses.size(); ++e)
    std::printf("%zu,%.6f\n", e + 1, losses[e]);
  std::fprintf(stderr, "saved checkpoint %s (%zu parameters)\n", opt.ckpt.c_str(),
               odfnet_model_parameter_count(model.get()));
  return 0;
}

double eval_accuracy(const ModelPtr& model, const DataPtr& data, int rotation,
                     const Options& opt) {
  double accuracy = 0.0;
  check(odfnet_model_evaluate(model.get(), data.get(), rotation, opt.seed,
                              opt.votes, opt.workers, &accuracy, nullptr));
  return accuracy;
}

int cmd_eval(const Options& opt) {
  echo(opt, "eval",
       "dataset=" + opt.dataset + " split=" + opt.split + " ckpt=" + opt.ckpt +
           " rotation=" + opt.rotation + " votes=" + std::to_string(opt.votes) +
           (opt.ckpt_so3.empty() ? "" : " ckpt-so3=" + opt.ckpt_so3));
  if (opt.split != "train" && opt.split != "test" && opt.split != "all")
    throw CLI::ValidationError("--split must be train, test or all");
  if (opt.votes < 1) throw CLI::ValidationError("--votes must be positive");

  DataPtr all = make_dataset(opt);
  DataPtr part = opt.split == "all" ? std::move(all) : dataset_part(all, opt.split);
  ModelPtr model = load_model(opt.ckpt);

  std::printf("scenario,accuracy\n");
  const int rotation = parse_rotation(opt.rotation);
  std::printf("%s,%.4f\n", opt.rotation.c_str(),
              eval_accuracy(model, part, rotation, opt));

  // Rotation-scenario table: --ckpt is the z-trained model, --ckpt-so3 the
  // so3-trained one.
  if (!opt.ckpt_so3.empty()) {
    ModelPtr so3_model = load_model(opt.ckpt_so3);
    std::printf("z/z,%.4f\n", eval_accuracy(model, part, ODFNET_ROTATION_Z, opt));
    std::printf("so3/so3,%.4f\n",
                eval_accuracy(so3_model, part, ODFNET_ROTATION_SO3, opt));
    std::printf("z/so3,%.4f\n",
                eval_accuracy(model, part, ODFNET_ROTATION_SO3, opt));
  }
  return 0;
}

int cmd_glyphs(const Options& opt) {
  BankFlags bank(opt);
  echo(opt, "glyphs",
       "in=" + opt.in_path + " align=" + opt.align + " level=" +
           std::to_string(opt.level) + " scale=" + std::to_string(opt.glyph_scale) +
           " out=" + opt.out_path);

  CloudPtr cloud = load_normalized_cloud(opt.in_path);
  odfnet_field* field_raw = nullptr;
  check(odfnet_field_compute(cloud.get(), &bank.config, opt.workers, &field_raw));
  FieldPtr field(field_raw);
  odfnet_directions* dirs_raw = nullptr;
  check(odfnet_directions_create(opt.level, &dirs_raw));
  DirsPtr dirs(dirs_raw);

  std::vector<int32_t> selection;
  if (!opt.select.empty()) selection = parse_int_list(opt.select, "--select");
  check(odfnet_export_glyphs(cloud.get(), field.get(), dirs.get(),
                             selection.empty() ? nullptr : selection.data(),
                             selection.size(), opt.glyph_scale,
                             opt.out_path.c_str()));
  std::fprintf(stderr, "wrote %s (%zu points)\n", opt.out_path.c_str(),
               selection.empty() ? odfnet_cloud_size(cloud.get()) : selection.size());
  return 0;
}

int cmd_contrib(const Options& opt) {
  echo(opt, "contrib", "in=" + opt.in_path + " ckpt=" + opt.ckpt);
  CloudPtr cloud = load_normalized_cloud(opt.in_path);
  ModelPtr model = load_model(opt.ckpt);

  std::vector<int32_t> credits(odfnet_cloud_size(cloud.get()));
  int degenerate = 0;
  check(odfnet_model_contribution(model.get(), cloud.get(), opt.workers,
                                  credits.data(), &degenerate));
  if (degenerate)
    std::fprintf(stderr,
                 "warning: degenerate contribution map (one point wins every "
                 "channel)\n");

  std::printf("index,score\n");
  for (size_t i = 0; i < credits.size(); ++i)
    std::printf("%zu,%d\n", i, credits[i]);
  return 0;
}

int cmd_bench(const Options& opt) {
  BankFlags bank(opt);
  const int multi = opt.workers > 0 ? opt.workers : odfnet_default_workers();
  echo(opt, "bench",
       "points=" + std::to_string(opt.bench_points) + " repeats=" +
           std::to_string(opt.repeats) + " cones=" + std::to_string(bank.cones()));
  if (opt.bench_points < 33)
    throw CLI::ValidationError("--points must be at least 33");
  if (opt.repeats < 1) throw CLI::ValidationError("--repeats must be positive");

  odfnet_dataset* data_raw = nullptr;
  check(odfnet_dataset_synthetic(1, opt.bench_points, 0.02, opt.seed, &data_raw));
  DataPtr data(data_raw);
  odfnet_cloud* cloud_raw = nullptr;
  check(odfnet_dataset_cloud(data.get(), 0, &cloud_raw));
  CloudPtr cloud(cloud_raw);

  auto timed_field = [&](int workers, double* ms) {
    const auto start = std::chrono::steady_clock::now();
    odfnet_field* field_raw = nullptr;
    check(odfnet_field_compute(cloud.get(), &bank.config, workers, &field_raw));
    *ms = elapsed_ms(start);
    return FieldPtr(field_raw);
  };

  std::printf("points,cones,workers,repeat,total_ms,per_point_us\n");
  bool identical = true;
  for (int r = 0; r < opt.repeats; ++r) {
    double ms = 0.0;
    const FieldPtr single = timed_field(1, &ms);
    std::printf("%d,%zu,1,%d,%.3f,%.3f\n", opt.bench_points, bank.cones(), r, ms,
                1000.0 * ms / opt.bench_points);
    if (multi == 1) continue;
    const FieldPtr parallel = timed_field(multi, &ms);
    std::printf("%d,%zu,%d,%d,%.3f,%.3f\n", opt.bench_points, bank.cones(), multi,
                r, ms, 1000.0 * ms / opt.bench_points);
    const size_t count = odfnet_field_points(single.get()) *
                         odfnet_field_directions(single.get()) *
                         odfnet_field_scales(single.get());
    if (std::memcmp(odfnet_field_values(single.get()),
                    odfnet_field_values(parallel.get()),
                    count * sizeof(float)) != 0)
      identical = false;
  }
  std::fprintf(stderr, "worker outputs identical: %s\n", identical ? "yes" : "no");
  if (!identical) {
    std::fprintf(stderr, "error: compute: outputs differ across worker counts\n");
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{"Orientation distribution features for point clouds"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", odfnet_version());
  app.add_option("--seed", opt.seed, "Base random seed");
  app.add_option("--workers", opt.workers,
                 "Worker threads (default: ODF_WORKERS or hardware)");
  app.add_flag("--verbose", opt.verbose, "Progress lines on stderr");

  CLI::App* directions =
      app.add_subcommand("directions", "Write the probe direction set");
  directions->add_option("--level", opt.level, "Subdivision level 0/1/2")
      ->check(CLI::Range(0, 2));
  directions->add_option("--out", opt.out_path, "Output xyz path")->required();

  CLI::App* features =
      app.add_subcommand("features", "Extract descriptors for one cloud");
  features->add_option("--in", opt.in_path, "Input cloud (.xyz/.off/.ply)")
      ->required();
  features->add_option("--align", opt.align, "none|rixy|rixyz");
  features->add_option("--level", opt.level, "Subdivision level")
      ->check(CLI::Range(0, 2));
  features->add_option("--ranks", opt.ranks, "Neighbor ranks, comma separated");
  features->add_option("--alphas-deg", opt.alphas_deg,
                       "Cone half-angles in degrees, comma separated");
  features->add_option("--out", opt.out_path, "Output descriptor file")->required();

  CLI::App* oracle =
      app.add_subcommand("oracle-check", "Cross-check extraction against a "
                                         "direct per-cone recount");
  oracle->add_option("--seeds", opt.seeds, "Number of random clouds");
  oracle->add_option("--max-points", opt.max_points, "Largest cloud size");
  oracle->add_flag("--perturb", opt.perturb, "Inject a fault (check must fail)");
  oracle->add_option("--level", opt.level, "Subdivision level")
      ->check(CLI::Range(0, 2));
  oracle->add_option("--ranks", opt.ranks, "Neighbor ranks, comma separated");
  oracle->add_option("--alphas-deg", opt.alphas_deg,
                     "Cone half-angles in degrees, comma separated");

  auto add_dataset_flags = [&](CLI::App* cmd) {
    cmd->add_option("--dataset", opt.dataset, "'synth' or a class directory")
        ->required();
    cmd->add_option("--per-class", opt.per_class, "Synthetic samples per class");
    cmd->add_option("--points", opt.points, "Synthetic points per cloud");
    cmd->add_option("--sigma", opt.sigma, "Synthetic surface noise");
  };

  CLI::App* train = app.add_subcommand("train", "Train the classifier");
  add_dataset_flags(train);
  train->add_option("--mode", opt.mode, "standard|xyz");
  train->add_option("--align", opt.train_align,
                    "none|rixy|rixyz (default rixy; xyz mode forces rixyz)");
  train->add_option("--rotation", opt.rotation, "Train-time rotations: none|z|so3");
  train->add_option("--epochs", opt.epochs, "Training epochs");
  train->add_option("--batch", opt.batch, "Batch size");
  train->add_option("--lr", opt.lr, "Learning rate");
  train->add_option("--momentum", opt.momentum, "SGD momentum");
  train->add_flag("--no-augment", opt.no_augment, "Disable augmentation");
  train->add_flag("--no-half-deletion", opt.no_half_deletion,
                  "Disable half-cloud pool masking");
  train->add_option("--ckpt", opt.ckpt, "Checkpoint output path")->required();

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_dataset_flags(eval);
  eval->add_option("--split", opt.split, "train|test|all");
  eval->add_option("--ckpt", opt.ckpt, "Checkpoint path")->required();
  eval->add_option("--ckpt-so3", opt.ckpt_so3,
                   "so3-trained checkpoint; adds the z/z, so3/so3, z/so3 table");
  eval->add_option("--rotation", opt.rotation, "Test-time rotations: none|z|so3");
  eval->add_option("--votes", opt.votes, "Rescaled copies per prediction");

  CLI::App* glyphs = app.add_subcommand("glyphs", "Export descriptor glyphs (OBJ)");
  glyphs->add_option("--in", opt.in_path, "Input cloud")->required();
  glyphs->add_option("--align", opt.align, "none|rixy|rixyz");
  glyphs->add_option("--level", opt.level, "Subdivision level")
      ->check(CLI::Range(0, 2));
  glyphs->add_option("--ranks", opt.ranks, "Neighbor ranks, comma separated");
  glyphs->add_option("--alphas-deg", opt.alphas_deg,
                     "Cone half-angles in degrees, comma separated");
  glyphs->add_option("--select", opt.select, "Point indices, comma separated");
  glyphs->add_option("--scale", opt.glyph_scale, "Glyph length scale");
  glyphs->add_option("--out", opt.out_path, "Output OBJ path")->required();

  CLI::App* contrib =
      app.add_subcommand("contrib", "Per-point pooling contribution scores");
  contrib->add_option("--in", opt.in_path, "Input cloud")->required();
  contrib->add_option("--ckpt", opt.ckpt, "Checkpoint path")->required();

  CLI::App* bench = app.add_subcommand("bench", "Time descriptor extraction");
  bench->add_option("--points", opt.bench_points, "Cloud size");
  bench->add_option("--repeats", opt.repeats, "Timing repetitions");
  bench->add_option("--level", opt.level, "Subdivision level")
      ->check(CLI::Range(0, 2));
  bench->add_option("--ranks", opt.ranks, "Neighbor ranks, comma separated");
  bench->add_option("--alphas-deg", opt.alphas_deg,
                    "Cone half-angles in degrees, comma separated");

  try {
    app.parse(argc, argv);
    if (directions->parsed()) return cmd_directions(opt);
    if (features->parsed()) return cmd_features(opt);
    if (oracle->parsed()) return cmd_oracle_check(opt);
    if (train->parsed()) return cmd_train(opt);
    if (eval->parsed()) return cmd_eval(opt);
    if (glyphs->parsed()) return cmd_glyphs(opt);
    if (contrib->parsed()) return cmd_contrib(opt);
    if (bench->parsed()) return cmd_bench(opt);
    return 1;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: invalid_argument: %s\n", e.what());
    return 1;
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s: %s\n", status_name(f.status),
                 odfnet_last_error());
    return exit_code(f.status);
  }
}
