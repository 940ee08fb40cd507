#pragma once

// Full-batch node classification: Adam with coupled weight decay, learning-rate
// reduction on a validation-accuracy plateau, early stopping, best-snapshot restore.

#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dnsd/autodiff.hpp"
#include "dnsd/benchmark.hpp"
#include "dnsd/model.hpp"

namespace dnsd {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double lr = 0.01;
  double weight_decay = 5e-4;
  int max_epochs = 500;
  double plateau_factor = 0.5;
  int plateau_patience = 20;
  int early_stop_patience = 100;
  double min_lr = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

class Adam {
 public:
  Adam(const std::vector<ad::Parameter>& params, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  /// One bias-corrected step; weight decay is added to the gradient before the moments.
  void step(std::vector<ad::Parameter>& params, double lr, double weight_decay);

  long steps() const noexcept { return t_; }
  const std::vector<Tensor>& first_moment() const noexcept { return m_; }
  const std::vector<Tensor>& second_moment() const noexcept { return v_; }

 private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Tensor> m_, v_;
};

/// Multiplies the learning rate by `factor` once more than `patience` consecutive
/// epochs pass without a strict improvement of the monitored (maximised) metric.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, int patience, double min_lr);
  double step(double metric);
  double lr() const noexcept { return lr_; }

 private:
  double lr_, factor_, min_lr_;
  int patience_;
  int bad_epochs_ = 0;
  double best_ = -std::numeric_limits<double>::infinity();
};

inline constexpr double kImprovementTolerance = 1e-12;

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_acc = 0.0;
  bool restored = false;
  double wall_seconds = 0.0;
  std::vector<std::string> test_names;
  std::vector<double> test_acc;
  double pooled_test_acc = 0.0;
};

struct TrainHooks {
  /// Replaces the measured validation accuracy (tests drive the stopping logic with it).
  std::function<double(int epoch, double measured)> val_override;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Argmax accuracy over masked rows; ties resolve to the lowest class index.
double accuracy(const Tensor& logits, const std::vector<int>& labels,
                const std::vector<std::uint8_t>& mask);

/// Trains on the bundle's train nodes, monitors its val nodes, and leaves `model` at
/// the best-validation snapshot. Epochs are numbered from 1; the metrics of epoch e
/// come from the forward pass of that epoch's update, i.e. from the parameters after
/// e − 1 steps, and those are the parameters kept as the snapshot.
TrainReport train(Model& model, const DatasetBundle& data, const TrainConfig& config,
                  const TrainHooks& hooks = {});

struct EvalResult {
  std::vector<double> per_graph;
  std::vector<std::size_t> sizes;
  double pooled = 0.0;
};

/// Accuracy over all nodes of each bundle, and over their concatenation.
EvalResult evaluate(Model& model, const std::vector<const DatasetBundle*>& bundles);

/// Everything except wall_seconds, so identical runs give identical bytes.
std::string report_json(const TrainReport& report);
/// epoch,lr,train_loss,train_acc,val_acc
std::string trace_csv(const TrainReport& report);

}  // namespace dnsd
