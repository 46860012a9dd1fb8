#include "odfnet/odfnet.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <utility>
#include <vector>

#include "odfnet/alignment.hpp"
#include "odfnet/error.hpp"
#include "odfnet/geometry.hpp"
#include "odfnet/io.hpp"
#include "odfnet/net.hpp"
#include "odfnet/odf.hpp"
#include "odfnet/parallel.hpp"
#include "odfnet/rng.hpp"

struct odfnet_cloud {
  odfnet::PointCloud cloud;
};

struct odfnet_directions {
  odfnet::DirectionSet set;
};

struct odfnet_field {
  odfnet::OdfField field;
};

struct odfnet_dataset {
  odfnet::Dataset data;
};

struct odfnet_model {
  odfnet::MiniOdfNet net;
};

namespace {

thread_local std::string g_last_error;

odfnet_status status_of(odfnet::ErrorKind kind) {
  switch (kind) {
    case odfnet::ErrorKind::InvalidArgument: return ODFNET_ERR_INVALID_ARGUMENT;
    case odfnet::ErrorKind::Parse: return ODFNET_ERR_PARSE;
    case odfnet::ErrorKind::Io: return ODFNET_ERR_IO;
    case odfnet::ErrorKind::Degenerate: return ODFNET_ERR_DEGENERATE;
    case odfnet::ErrorKind::Compute: return ODFNET_ERR_COMPUTE;
  }
  return ODFNET_ERR_COMPUTE;
}

template <typename Fn>
odfnet_status wrap(Fn&& fn) noexcept {
  try {
    fn();
    g_last_error.clear();
    return ODFNET_OK;
  } catch (const odfnet::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return ODFNET_ERR_COMPUTE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ODFNET_ERR_COMPUTE;
  }
}

odfnet_status fail_null(const char* what) {
  g_last_error = std::string(what) + " must not be null";
  return ODFNET_ERR_INVALID_ARGUMENT;
}

odfnet::AlignMode align_of(int align) {
  switch (align) {
    case ODFNET_ALIGN_NONE: return odfnet::AlignMode::None;
    case ODFNET_ALIGN_RIXY: return odfnet::AlignMode::RiXY;
    case ODFNET_ALIGN_RIXYZ: return odfnet::AlignMode::RiXYZ;
  }
  throw odfnet::Error(odfnet::ErrorKind::InvalidArgument,
                      "bad alignment mode " + std::to_string(align));
}

odfnet::RotationScenario rotation_of(int rotation) {
  switch (rotation) {
    case ODFNET_ROTATION_NONE: return odfnet::RotationScenario::None;
    case ODFNET_ROTATION_Z: return odfnet::RotationScenario::Z;
    case ODFNET_ROTATION_SO3: return odfnet::RotationScenario::SO3;
  }
  throw odfnet::Error(odfnet::ErrorKind::InvalidArgument,
                      "bad rotation scenario " + std::to_string(rotation));
}

odfnet::ConeBank bank_of(const odfnet_bank_config* config) {
  odfnet::ConeBank defaults = odfnet::default_cone_bank();
  if (!config) return defaults;
  std::vector<int> ranks;
  if (config->rank_count > 0) {
    if (!config->ranks)
      throw odfnet::Error(odfnet::ErrorKind::InvalidArgument,
                          "rank_count set but ranks is null");
    for (size_t i = 0; i < config->rank_count; ++i)
      ranks.push_back(static_cast<int>(config->ranks[i]));
  } else {
    ranks = defaults.ranks;
  }
  std::vector<double> alphas;
  if (config->alpha_count > 0) {
    if (!config->alphas_radians)
      throw odfnet::Error(odfnet::ErrorKind::InvalidArgument,
                          "alpha_count set but alphas_radians is null");
    alphas.assign(config->alphas_radians, config->alphas_radians + config->alpha_count);
  } else {
    alphas = defaults.alphas;
  }
  return odfnet::make_cone_bank(config->direction_level, std::move(ranks),
                                std::move(alphas));
}

int resolve_workers(int workers) {
  return workers <= 0 ? odfnet::default_worker_count() : workers;
}

}  // namespace

extern "C" {

const char* odfnet_version(void) { return "1.0.0"; }

const char* odfnet_last_error(void) { return g_last_error.c_str(); }

int odfnet_default_workers(void) { return odfnet::default_worker_count(); }

/* ---------- point clouds ---------- */

odfnet_status odfnet_cloud_load(const char* path, odfnet_cloud** out) {
  if (!path) return fail_null("path");
  if (!out) return fail_null("out");
  return wrap([&] { *out = new odfnet_cloud{odfnet::read_point_cloud(path)}; });
}

odfnet_status odfnet_cloud_create(const double* xyz, size_t count,
                                  odfnet_cloud** out) {
  if (!out) return fail_null("out");
  if (count > 0 && !xyz) return fail_null("xyz");
  return wrap([&] {
    odfnet::PointCloud cloud;
    cloud.points.reserve(count);
    for (size_t i = 0; i < count; ++i)
      cloud.points.push_back({xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]});
    *out = new odfnet_cloud{std::move(cloud)};
  });
}

odfnet_status odfnet_cloud_normalize(odfnet_cloud* cloud) {
  if (!cloud) return fail_null("cloud");
  return wrap([&] { cloud->cloud = odfnet::normalize_to_unit_sphere(cloud->cloud); });
}

size_t odfnet_cloud_size(const odfnet_cloud* cloud) {
  return cloud ? cloud->cloud.size() : 0;
}

odfnet_status odfnet_cloud_points(const odfnet_cloud* cloud, double* xyz) {
  if (!cloud) return fail_null("cloud");
  if (!xyz) return fail_null("xyz");
  return wrap([&] {
    for (size_t i = 0; i < cloud->cloud.size(); ++i) {
      xyz[3 * i] = cloud->cloud.points[i].x;
      xyz[3 * i + 1] = cloud->cloud.points[i].y;
      xyz[3 * i + 2] = cloud->cloud.points[i].z;
    }
  });
}

odfnet_status odfnet_cloud_save_xyz(const odfnet_cloud* cloud, const char* path) {
  if (!cloud) return fail_null("cloud");
  if (!path) return fail_null("path");
  return wrap([&] { odfnet::write_xyz(cloud->cloud, path); });
}

void odfnet_cloud_destroy(odfnet_cloud* cloud) { delete cloud; }

/* ---------- probe directions ---------- */

odfnet_status odfnet_directions_create(int level, odfnet_directions** out) {
  if (!out) return fail_null("out");
  return wrap([&] { *out = new odfnet_directions{odfnet::icosphere_directions(level)}; });
}

size_t odfnet_directions_count(const odfnet_directions* dirs) {
  return dirs ? dirs->set.size() : 0;
}

odfnet_status odfnet_directions_get(const odfnet_directions* dirs, double* xyz) {
  if (!dirs) return fail_null("dirs");
  if (!xyz) return fail_null("xyz");
  return wrap([&] {
    for (size_t i = 0; i < dirs->set.size(); ++i) {
      xyz[3 * i] = dirs->set.directions[i].x;
      xyz[3 * i + 1] = dirs->set.directions[i].y;
      xyz[3 * i + 2] = dirs->set.directions[i].z;
    }
  });
}

void odfnet_directions_destroy(odfnet_directions* dirs) { delete dirs; }

/* ---------- descriptor extraction ---------- */

void odfnet_bank_config_init(odfnet_bank_config* config) {
  if (!config) return;
  std::memset(config, 0, sizeof(*config));
  config->direction_level = 1;
  config->align = ODFNET_ALIGN_NONE;
}

odfnet_status odfnet_field_compute(const odfnet_cloud* cloud,
                                   const odfnet_bank_config* config, int workers,
                                   odfnet_field** out) {
  if (!cloud) return fail_null("cloud");
  if (!out) return fail_null("out");
  return wrap([&] {
    const odfnet::ConeBank bank = bank_of(config);
    const odfnet::AlignMode align = align_of(config ? config->align : 0);
    *out = new odfnet_field{odfnet::compute_odf_field(cloud->cloud, bank, align,
                                                      resolve_workers(workers))};
  });
}

size_t odfnet_field_points(const odfnet_field* field) {
  return field ? static_cast<size_t>(field->field.point_count) : 0;
}

size_t odfnet_field_directions(const odfnet_field* field) {
  return field ? static_cast<size_t>(field->field.direction_count) : 0;
}

size_t odfnet_field_scales(const odfnet_field* field) {
  return field ? static_cast<size_t>(field->field.scale_count) : 0;
}

int odfnet_field_align(const odfnet_field* field) {
  return field ? static_cast<int>(field->field.align) : 0;
}

const float* odfnet_field_values(const odfnet_field* field) {
  return field ? field->field.values.data() : nullptr;
}

odfnet_status odfnet_field_save(const odfnet_field* field, const char* path) {
  if (!field) return fail_null("field");
  if (!path) return fail_null("path");
  return wrap([&] { odfnet::write_odf(field->field, path); });
}

odfnet_status odfnet_field_load(const char* path, odfnet_field** out) {
  if (!path) return fail_null("path");
  if (!out) return fail_null("out");
  return wrap([&] { *out = new odfnet_field{odfnet::read_odf(path)}; });
}

void odfnet_field_destroy(odfnet_field* field) { delete field; }

odfnet_status odfnet_oracle_check(uint64_t seed, int point_count,
                                  const odfnet_bank_config* config, int perturb,
                                  int64_t* mismatch_point, int64_t* mismatch_cone) {
  if (mismatch_point) *mismatch_point = -1;
  if (mismatch_cone) *mismatch_cone = -1;
  return wrap([&] {
    const odfnet::ConeBank bank = bank_of(config);
    if (point_count <= bank.max_rank())
      throw odfnet::Error(odfnet::ErrorKind::InvalidArgument,
                          "point count must exceed the largest rank " +
                              std::to_string(bank.max_rank()));

    odfnet::SplitMix64 rng(seed);
    odfnet::PointCloud cloud;
    cloud.points.reserve(static_cast<size_t>(point_count));
    for (int i = 0; i < point_count; ++i)
      cloud.points.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                              rng.uniform(-1.0, 1.0)});
    cloud = odfnet::normalize_to_unit_sphere(cloud);

    std::vector<double> fast = odfnet::odf_cloud_values(cloud, bank);
    const size_t cones = static_cast<size_t>(bank.cone_count());
    if (perturb && !fast.empty()) fast[cones / 2] += 1.0 / bank.ranks[0];

    for (int p = 0; p < point_count; ++p) {
      const std::vector<double> slow = odfnet::odf_brute_force(cloud, p, bank);
      for (size_t c = 0; c < cones; ++c) {
        if (fast[static_cast<size_t>(p) * cones + c] == slow[c]) continue;
        if (mismatch_point) *mismatch_point = p;
        if (mismatch_cone) *mismatch_cone = static_cast<int64_t>(c);
        throw odfnet::Error(
            odfnet::ErrorKind::Compute,
            "descriptor mismatch at point " + std::to_string(p) + ", cone " +
                std::to_string(c));
      }
    }
  });
}

odfnet_status odfnet_export_glyphs(const odfnet_cloud* cloud,
                                   const odfnet_field* field,
                                   const odfnet_directions* dirs,
                                   const int32_t* selection, size_t selection_count,
                                   double scale, const char* path) {
  if (!cloud) return fail_null("cloud");
  if (!field) return fail_null("field");
  if (!dirs) return fail_null("dirs");
  if (!path) return fail_null("path");
  if (selection_count > 0 && !selection) return fail_null("selection");
  return wrap([&] {
    std::vector<int> picks;
    if (selection_count > 0) {
      picks.assign(selection, selection + selection_count);
    } else {
      picks.resize(cloud->cloud.size());
      for (size_t i = 0; i < picks.size(); ++i) picks[i] = static_cast<int>(i);
    }
    odfnet::export_glyphs(cloud->cloud, field->field, dirs->set, picks, path, scale);
  });
}

/* ---------- datasets ---------- */

odfnet_status odfnet_dataset_synthetic(int per_class, int points, double sigma,
                                       uint64_t seed, odfnet_dataset** out) {
  if (!out) return fail_null("out");
  return wrap([&] {
    odfnet::SyntheticSpec spec;
    spec.samples_per_class = per_class;
    spec.points_per_cloud = points;
    spec.sigma = sigma;
    spec.seed = seed;
    *out = new odfnet_dataset{odfnet::generate_synthetic_dataset(spec)};
  });
}

odfnet_status odfnet_dataset_load_dir(const char* path, odfnet_dataset** out) {
  if (!path) return fail_null("path");
  if (!out) return fail_null("out");
  return wrap([&] { *out = new odfnet_dataset{odfnet::load_dataset_directory(path)}; });
}

odfnet_status odfnet_dataset_split(const odfnet_dataset* all, odfnet_dataset** train,
                                   odfnet_dataset** test) {
  if (!all) return fail_null("all");
  if (!train) return fail_null("train");
  if (!test) return fail_null("test");
  return wrap([&] {
    auto train_part = new odfnet_dataset{};
    try {
      auto test_part = new odfnet_dataset{};
      odfnet::split_dataset(all->data, &train_part->data, &test_part->data);
      *train = train_part;
      *test = test_part;
    } catch (...) {
      delete train_part;
      throw;
    }
  });
}

size_t odfnet_dataset_size(const odfnet_dataset* data) {
  return data ? data->data.size() : 0;
}

int odfnet_dataset_class_count(const odfnet_dataset* data) {
  return data ? data->data.class_count() : 0;
}

const char* odfnet_dataset_class_name(const odfnet_dataset* data, int label) {
  if (!data || label < 0 || label >= data->data.class_count()) return nullptr;
  return data->data.class_names[static_cast<size_t>(label)].c_str();
}

int odfnet_dataset_label(const odfnet_dataset* data, size_t index) {
  if (!data || index >= data->data.size()) return -1;
  return data->data.clouds[index].label;
}

odfnet_status odfnet_dataset_cloud(const odfnet_dataset* data, size_t index,
                                   odfnet_cloud** out) {
  if (!data) return fail_null("data");
  if (!out) return fail_null("out");
  return wrap([&] {
    if (index >= data->data.size())
      throw odfnet::Error(odfnet::ErrorKind::InvalidArgument,
                          "dataset index " + std::to_string(index) +
                              " out of range (size " +
                              std::to_string(data->data.size()) + ")");
    *out = new odfnet_cloud{data->data.clouds[index]};
  });
}

void odfnet_dataset_destroy(odfnet_dataset* data) { delete data; }

/* ---------- models ---------- */

void odfnet_net_config_init(odfnet_net_config* config) {
  if (!config) return;
  config->mode = ODFNET_MODE_STANDARD;
  config->align = ODFNET_ALIGN_NONE;
  config->class_count = 4;
  config->edge_k = 32;
}

odfnet_status odfnet_model_create(const odfnet_net_config* config, uint64_t seed,
                                  odfnet_model** out) {
  if (!config) return fail_null("config");
  if (!out) return fail_null("out");
  return wrap([&] {
    odfnet::NetConfig cfg;
    if (config->mode != ODFNET_MODE_STANDARD && config->mode != ODFNET_MODE_XYZ)
      throw odfnet::Error(odfnet::ErrorKind::InvalidArgument,
                          "bad net mode " + std::to_string(config->mode));
    cfg.mode = config->mode == ODFNET_MODE_XYZ ? odfnet::NetMode::XyzInvariant
                                               : odfnet::NetMode::Standard;
    cfg.align = align_of(config->align);
    cfg.class_count = config->class_count;
    cfg.edge_k = config->edge_k;
    *out = new odfnet_model{odfnet::MiniOdfNet(cfg, seed)};
  });
}

odfnet_status odfnet_model_load(const char* path, odfnet_model** out) {
  if (!path) return fail_null("path");
  if (!out) return fail_null("out");
  return wrap([&] { *out = new odfnet_model{odfnet::load_model(path)}; });
}

odfnet_status odfnet_model_save(const odfnet_model* model, const char* path) {
  if (!model) return fail_null("model");
  if (!path) return fail_null("path");
  return wrap([&] { odfnet::save_model(model->net, path); });
}

int odfnet_model_mode(const odfnet_model* model) {
  if (!model) return -1;
  return model->net.config().mode == odfnet::NetMode::XyzInvariant
             ? ODFNET_MODE_XYZ
             : ODFNET_MODE_STANDARD;
}

int odfnet_model_align(const odfnet_model* model) {
  return model ? static_cast<int>(model->net.config().align) : -1;
}

int odfnet_model_class_count(const odfnet_model* model) {
  return model ? model->net.config().class_count : 0;
}

size_t odfnet_model_parameter_count(const odfnet_model* model) {
  return model ? model->net.parameter_count() : 0;
}

void odfnet_model_destroy(odfnet_model* model) { delete model; }

void odfnet_train_config_init(odfnet_train_config* config) {
  if (!config) return;
  config->epochs = 12;
  config->batch_size = 16;
  config->learning_rate = 0.03;
  config->momentum = 0.9;
  config->seed = 29;
  config->rotation = ODFNET_ROTATION_Z;
  config->augment = 1;
  config->half_deletion = 1;
  config->workers = 0;
  config->verbose = 0;
}

odfnet_status odfnet_model_train(odfnet_model* model, const odfnet_dataset* data,
                                 const odfnet_train_config* config,
                                 double* epoch_loss) {
  if (!model) return fail_null("model");
  if (!data) return fail_null("data");
  if (!config) return fail_null("config");
  return wrap([&] {
    odfnet::TrainConfig cfg;
    cfg.epochs = config->epochs;
    cfg.batch_size = config->batch_size;
    cfg.learning_rate = config->learning_rate;
    cfg.momentum = config->momentum;
    cfg.seed = config->seed;
    cfg.rotation = rotation_of(config->rotation);
    if (!config->augment) {
      cfg.augment.scale = false;
      cfg.augment.flip_xy = false;
      cfg.augment.rot90 = false;
    }
    cfg.half_deletion = config->half_deletion != 0;
    cfg.workers = resolve_workers(config->workers);
    cfg.verbose = config->verbose != 0;
    const odfnet::TrainResult result = odfnet::train(model->net, data->data, cfg);
    if (epoch_loss)
      for (size_t i = 0; i < result.epoch_loss.size(); ++i)
        epoch_loss[i] = result.epoch_loss[i];
  });
}

odfnet_status odfnet_model_predict(const odfnet_model* model,
                                   const odfnet_cloud* cloud, int votes,
                                   uint64_t seed, int workers, int* label,
                                   double* probabilities) {
  if (!model) return fail_null("model");
  if (!cloud) return fail_null("cloud");
  if (!label) return fail_null("label");
  return wrap([&] {
    odfnet::SplitMix64 rng(seed);
    const int w = resolve_workers(workers);
    std::vector<double> probs;
    if (votes <= 1) {
      probs = odfnet::softmax(odfnet::predict_logits(model->net, cloud->cloud, w));
      *label = 0;
      for (size_t i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[static_cast<size_t>(*label)]) *label = static_cast<int>(i);
    } else {
      const odfnet::VoteResult vote =
          odfnet::predict_with_voting(model->net, cloud->cloud, votes, rng, 0.8, 1.25, w);
      probs = vote.probabilities;
      *label = vote.label;
    }
    if (probabilities)
      for (size_t i = 0; i < probs.size(); ++i) probabilities[i] = probs[i];
  });
}

odfnet_status odfnet_model_evaluate(const odfnet_model* model,
                                    const odfnet_dataset* test, int rotation,
                                    uint64_t seed, int votes, int workers,
                                    double* accuracy, int32_t* predicted) {
  if (!model) return fail_null("model");
  if (!test) return fail_null("test");
  if (!accuracy) return fail_null("accuracy");
  return wrap([&] {
    const odfnet::EvalResult result =
        odfnet::evaluate(model->net, test->data, rotation_of(rotation), seed, votes,
                         resolve_workers(workers));
    *accuracy = result.accuracy;
    if (predicted)
      for (size_t i = 0; i < result.predicted.size(); ++i)
        predicted[i] = result.predicted[i];
  });
}

odfnet_status odfnet_model_contribution(const odfnet_model* model,
                                        const odfnet_cloud* cloud, int workers,
                                        int32_t* credits, int* degenerate) {
  if (!model) return fail_null("model");
  if (!cloud) return fail_null("cloud");
  if (!credits) return fail_null("credits");
  return wrap([&] {
    const std::vector<double> odf =
        odfnet::net_odf_values(model->net, cloud->cloud, resolve_workers(workers));
    const odfnet::ContributionMap map =
        odfnet::contribution_map(model->net, cloud->cloud, odf);
    for (size_t i = 0; i < map.credits.size(); ++i) credits[i] = map.credits[i];
    if (degenerate) *degenerate = map.degenerate ? 1 : 0;
  });
}

}  // extern "C"
