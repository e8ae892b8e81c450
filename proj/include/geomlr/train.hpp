#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geomlr/dataset.hpp"
#include "geomlr/grad.hpp"
#include "geomlr/optim.hpp"

namespace geomlr {

enum class Classifier { LogEig, Lem, Aim, Em, Lcm, Bwm, Lie };

std::string classifier_name(Classifier c);
Classifier parse_classifier(const std::string& name);

struct RunConfig {
  Classifier classifier = Classifier::Lem;
  double theta = 1.0;
  double alpha = 1.0;
  double beta = 0.0;
  Index epochs = 200;
  Index batch = 30;
  double lr = 1e-2;
  double momentum = 0.9;
  double grad_clip = 5.0;  // 0 disables clipping
  std::uint64_t seed = 42;

  void validate() const;
  MetricParams metric_params() const;  // SPD-family classifiers only
  OptConfig opt_config() const;
};

// Flat key=value file, one pair per line, '#' starts a comment. Unknown keys
// are rejected.
RunConfig load_run_config(const std::string& path);

struct EpochRow {
  Index epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double seconds = 0.0;
};

struct RunReport {
  std::vector<EpochRow> rows;
  double total_seconds = 0.0;
  std::string digest;  // FNV-1a over the rows (seconds excluded) and final parameters
};

enum class ExecMode { Serial, Parallel };

struct Model {
  Classifier classifier = Classifier::Lem;
  MetricParams mp;     // SPD families
  SpdMlrLayer spd;     // lem/aim/em/lcm/bwm
  LieMlrLayer lie;     // lie
  LogEigLayer logeig;  // logeig
};

Model init_model(const RunConfig& cfg, const Dataset& ds);

Logits model_logits(const Model& m, const Dataset& ds, std::size_t sample);

// Fraction of correctly argmax-classified samples; ties resolve to the
// lowest class index.
double model_accuracy(const Model& m, const Dataset& ds, const std::vector<std::size_t>& idx,
                      ExecMode mode);

double model_mean_loss(const Model& m, const Dataset& ds, const std::vector<std::size_t>& idx,
                       ExecMode mode);

// Batch-mean loss and parameter gradients. For SPD and Lie classifiers the
// bundle holds dP/dA per class (input gradients dropped); for LogEig it holds
// the weight matrix under dA[0][0] and the bias column under dA[1][0].
struct BatchGrad {
  double loss = 0.0;
  GradBundle bundle;
};
BatchGrad batch_gradient(const Model& m, const Dataset& ds,
                         const std::vector<std::size_t>& idx, ExecMode mode);

// Full SGD run; deterministic given the config seed (the digest is invariant
// to ExecMode and thread count). Divergence is reported with the epoch index.
RunReport train(const Dataset& ds, const RunConfig& cfg, ExecMode mode = ExecMode::Parallel,
                Model* trained = nullptr);

void write_csv(const RunReport& report, const std::string& path);

void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

}  // namespace geomlr
