#include "dnsd/training.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace dnsd {

void TrainConfig::validate() const {
  if (!(lr > 0) || !(weight_decay >= 0) || !(plateau_factor > 0 && plateau_factor < 1) ||
      !(min_lr > 0)) {
    throw TrainingError("train config: rates must be positive and factor in (0, 1)");
  }
  if (max_epochs <= 0 || plateau_patience <= 0 || early_stop_patience <= 0) {
    throw TrainingError("train config: epoch counts must be positive");
  }
  if (plateau_patience >= max_epochs || early_stop_patience >= max_epochs) {
    throw TrainingError("train config: patience must be below max_epochs");
  }
}

Adam::Adam(const std::vector<ad::Parameter>& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params) {
    m_.emplace_back(p.value.shape());
    v_.emplace_back(p.value.shape());
  }
}

void Adam::step(std::vector<ad::Parameter>& params, double lr, double weight_decay) {
  if (params.size() != m_.size()) throw TrainingError("adam: parameter list changed");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, double(t_));
  const double c2 = 1.0 - std::pow(beta2_, double(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    double* theta = params[k].value.data();
    const double* grad = params[k].grad.data();
    double* m = m_[k].data();
    double* v = v_[k].data();
    for (std::size_t i = 0; i < m_[k].size(); ++i) {
      const double g = grad[i] + weight_decay * theta[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      theta[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

PlateauScheduler::PlateauScheduler(double lr, double factor, int patience, double min_lr)
    : lr_(lr), factor_(factor), min_lr_(min_lr), patience_(patience) {}

double PlateauScheduler::step(double metric) {
  if (metric > best_ + kImprovementTolerance) {
    best_ = metric;
    bad_epochs_ = 0;
  } else if (++bad_epochs_ > patience_) {
    lr_ = std::max(min_lr_, lr_ * factor_);
    bad_epochs_ = 0;
  }
  return lr_;
}

double accuracy(const Tensor& logits, const std::vector<int>& labels,
                const std::vector<std::uint8_t>& mask) {
  const std::size_t n = logits.dim(0), C = logits.dim(1);
  if (labels.size() != n || mask.size() != n) throw ShapeError("accuracy: length mismatch");
  std::size_t total = 0, correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const double* row = logits.data() + i * C;
    std::size_t best = 0;
    for (std::size_t c = 1; c < C; ++c)
      if (row[c] > row[best]) best = c;
    correct += static_cast<int>(best) == labels[i];
    ++total;
  }
  return total ? double(correct) / double(total) : 0.0;
}

TrainReport train(Model& model, const DatasetBundle& data, const TrainConfig& config,
                  const TrainHooks& hooks) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const MessageIndex index = MessageIndex::from_graph(data.graph);
  const auto train_mask = data.mask(SplitRole::train);
  const auto val_mask = data.mask(SplitRole::val);
  if (std::find(train_mask.begin(), train_mask.end(), 1) == train_mask.end() ||
      std::find(val_mask.begin(), val_mask.end(), 1) == val_mask.end()) {
    throw TrainingError("train: dataset needs both train and val nodes");
  }

  Adam adam(model.parameters(), config.beta1, config.beta2, config.adam_eps);
  PlateauScheduler sched(config.lr, config.plateau_factor, config.plateau_patience, config.min_lr);
  TrainReport rep;
  rep.best_val_acc = -1.0;
  std::vector<Tensor> best = model.snapshot();

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = sched.lr();
    try {
      ad::Tape tape;
      const ad::Var logits = model.forward(tape, tape.constant(data.features), index);
      const ad::Var loss = ad::cross_entropy(logits, data.labels, train_mask);
      {
        ad::Tape scratch;
        rec.val_loss =
            ad::cross_entropy(scratch.constant(logits.value()), data.labels, val_mask).value().item();
      }
      tape.backward(loss);
      rec.train_loss = loss.value().item();
      rec.train_acc = accuracy(logits.value(), data.labels, train_mask);
      rec.val_acc = accuracy(logits.value(), data.labels, val_mask);
    } catch (const NonFiniteError& e) {
      throw TrainingError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
    if (hooks.val_override) rec.val_acc = hooks.val_override(epoch, rec.val_acc);

    if (rec.val_acc > rep.best_val_acc + kImprovementTolerance) {
      rep.best_val_acc = rec.val_acc;
      rep.best_epoch = epoch;
      best = model.snapshot();
    }
    rep.epochs.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);

    adam.step(model.parameters(), sched.lr(), config.weight_decay);
    sched.step(rec.val_acc);
    if (epoch - rep.best_epoch >= config.early_stop_patience) break;
  }
  model.restore(best);
  rep.restored = true;
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

EvalResult evaluate(Model& model, const std::vector<const DatasetBundle*>& bundles) {
  EvalResult out;
  std::size_t total = 0;
  double correct = 0.0;
  for (const DatasetBundle* b : bundles) {
    if (b->features.dim(1) != model.config().input_dim) {
      throw ShapeError("evaluate: " + b->name + " has " + std::to_string(b->features.dim(1)) +
                       " features, model expects " + std::to_string(model.config().input_dim));
    }
    const Tensor logits = model.logits(b->features, MessageIndex::from_graph(b->graph));
    const double acc = accuracy(logits, b->labels, b->all_nodes());
    out.per_graph.push_back(acc);
    out.sizes.push_back(b->num_nodes());
    correct += acc * double(b->num_nodes());
    total += b->num_nodes();
  }
  out.pooled = total ? correct / double(total) : 0.0;
  return out;
}

std::string report_json(const TrainReport& r) {
  using nlohmann::json;
  json epochs = json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"lr", e.lr}, {"train_loss", e.train_loss},
                      {"train_acc", e.train_acc}, {"val_loss", e.val_loss}, {"val_acc", e.val_acc}});
  }
  json tests = json::array();
  for (std::size_t i = 0; i < r.test_acc.size(); ++i) {
    tests.push_back({{"graph", i < r.test_names.size() ? r.test_names[i] : ""}, {"accuracy", r.test_acc[i]}});
  }
  json j = {{"best_epoch", r.best_epoch}, {"best_val_acc", r.best_val_acc},
            {"restored", r.restored},     {"epochs_run", r.epochs.size()},
            {"test", tests},              {"pooled_test_acc", r.pooled_test_acc},
            {"epochs", epochs}};
  return j.dump(1) + "\n";
}

std::string trace_csv(const TrainReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,lr,train_loss,train_acc,val_acc\n";
  for (const auto& e : r.epochs) {
    out << e.epoch << ',' << e.lr << ',' << e.train_loss << ',' << e.train_acc << ',' << e.val_acc << '\n';
  }
  return out.str();
}

}  // namespace dnsd
