#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "contextloc/config.hpp"
#include "contextloc/dataset.hpp"
#include "contextloc/error.hpp"
#include "contextloc/heads.hpp"
#include "contextloc/io.hpp"
#include "contextloc/model.hpp"
#include "contextloc/random.hpp"

namespace contextloc {

/// Learning rate in effect during 1-based `epoch`: the base rate divided by 10
/// once for every milestone already passed.
inline double lr_at_epoch(const OptimizerConfig& opt, int epoch) {
  double lr = opt.lr;
  for (int m : opt.lr_milestones)
    if (epoch > m) lr *= 0.1;
  return lr;
}

/// SGD with heavy-ball momentum: v = mu * v + g; w -= lr * v.
template <typename T>
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum = 0.9) : momentum_(momentum) {}

  void step(const std::vector<Parameter<T>*>& params, double lr) {
    if (velocity_.size() != params.size()) {
      velocity_.clear();
      for (auto* p : params) velocity_.emplace_back(p->value.rows(), p->value.cols());
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
      Parameter<T>& p = *params[k];
      Matrix<T>& v = velocity_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        v[i] = static_cast<T>(momentum_) * v[i] + p.grad[i];
        p.value[i] -= static_cast<T>(lr) * v[i];
      }
    }
  }

  std::vector<Matrix<T>>& velocity() noexcept { return velocity_; }
  const std::vector<Matrix<T>>& velocity() const noexcept { return velocity_; }

 private:
  double momentum_;
  std::vector<Matrix<T>> velocity_;
};

struct EpochMetrics {
  int epoch = 0;
  double loss_cls = 0.0;
  double loss_comp = 0.0;
  double loss_reg = 0.0;
  double train_acc = 0.0;
};

/// CSV with header epoch,loss_cls,loss_comp,loss_reg,train_acc.
inline std::string metrics_csv(const std::vector<EpochMetrics>& log) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,loss_cls,loss_comp,loss_reg,train_acc\n";
  for (const auto& m : log)
    os << m.epoch << "," << m.loss_cls << "," << m.loss_comp << "," << m.loss_reg << "," << m.train_acc << "\n";
  return os.str();
}

template <typename T>
struct Checkpoint {
  Config config;
  int epoch = 0;
  Model<T> model;
  std::vector<Matrix<T>> velocity;
};

// Binary checkpoint: "CTXLOCK1\n", u64 config length, config text, u64 model
// hash, u32 epoch, u32 tensor count, then per tensor: u32 name length, name,
// u64 rows, u64 cols, rows*cols f64 values, rows*cols f64 velocity values.
// Values are stored as f64 whatever T is, so float32 and float64 models both
// round-trip exactly.

template <typename T>
std::string encode_checkpoint(Checkpoint<T>& ckpt) {
  std::string out = "CTXLOCK1\n";
  const std::string cfg = ckpt.config.to_text();
  detail::put_le<std::uint64_t>(out, cfg.size());
  out += cfg;
  detail::put_le<std::uint64_t>(out, ckpt.config.model_hash());
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.epoch));
  const auto params = ckpt.model.parameters();
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Parameter<T>& p = *params[k];
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    detail::put_le<std::uint64_t>(out, p.value.rows());
    detail::put_le<std::uint64_t>(out, p.value.cols());
    for (T v : p.value.data()) detail::append_float(out, static_cast<double>(v), FloatWidth::f64);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double v = k < ckpt.velocity.size() ? static_cast<double>(ckpt.velocity[k][i]) : 0.0;
      detail::append_float(out, v, FloatWidth::f64);
    }
  }
  return out;
}

template <typename T>
Checkpoint<T> decode_checkpoint(std::string_view bytes) {
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (bytes.size() - pos < n) throw ParseError("truncated checkpoint at byte offset " + std::to_string(pos));
  };
  need(9);
  if (bytes.substr(0, 9) != "CTXLOCK1\n") throw ParseError("bad checkpoint magic at byte offset 0");
  pos = 9;
  auto u64 = [&] {
    need(8);
    const auto v = detail::get_le<std::uint64_t>(bytes.data() + pos);
    pos += 8;
    return v;
  };
  auto u32 = [&] {
    need(4);
    const auto v = detail::get_le<std::uint32_t>(bytes.data() + pos);
    pos += 4;
    return v;
  };
  const std::uint64_t cfg_len = u64();
  need(cfg_len);
  Checkpoint<T> ckpt;
  ckpt.config = parse_config(bytes.substr(pos, cfg_len));
  pos += cfg_len;
  const std::uint64_t hash = u64();
  if (hash != ckpt.config.model_hash()) throw ParseError("checkpoint model hash does not match its config");
  ckpt.epoch = static_cast<int>(u32());
  ckpt.model = Model<T>(ckpt.config.model, ckpt.config.seed);
  const auto params = ckpt.model.parameters();
  const std::uint32_t count = u32();
  if (count != params.size()) {
    throw ParseError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                     std::to_string(params.size()));
  }
  for (Parameter<T>* p : params) {
    const std::uint32_t name_len = u32();
    need(name_len);
    const std::string name(bytes.substr(pos, name_len));
    pos += name_len;
    if (name != p->name) throw ParseError("checkpoint tensor '" + name + "' where '" + p->name + "' was expected");
    const std::uint64_t rows = u64(), cols = u64();
    if (rows != p->value.rows() || cols != p->value.cols()) {
      throw ParseError("checkpoint tensor '" + name + "' has the wrong shape");
    }
    need(16 * rows * cols);
    for (std::size_t i = 0; i < p->value.size(); ++i, pos += 8) {
      p->value[i] = static_cast<T>(detail::read_float(bytes.data() + pos, FloatWidth::f64));
    }
    Matrix<T> v(rows, cols);
    for (std::size_t i = 0; i < v.size(); ++i, pos += 8) {
      v[i] = static_cast<T>(detail::read_float(bytes.data() + pos, FloatWidth::f64));
    }
    ckpt.velocity.push_back(std::move(v));
  }
  if (pos != bytes.size()) throw ParseError("trailing data in checkpoint at byte offset " + std::to_string(pos));
  return ckpt;
}

template <typename T>
void save_checkpoint(Checkpoint<T>& ckpt, const std::filesystem::path& path) {
  detail::write_file(path, encode_checkpoint(ckpt));
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  try {
    return decode_checkpoint<T>(std::string_view(bytes.data(), bytes.size()));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

/// Prepared form of every video in a dataset, kept alongside the dataset it
/// points into.
template <typename T>
std::vector<PreparedVideo<T>> prepare_dataset(const Dataset<T>& data, double theta_near) {
  std::vector<PreparedVideo<T>> out;
  out.reserve(data.videos.size());
  for (const auto& v : data.videos) out.push_back(prepare_video(v.features, v.proposals, theta_near));
  return out;
}

template <typename T>
struct BatchLoss {
  double total = 0.0, cls = 0.0, comp = 0.0, reg = 0.0;
  std::size_t proposals = 0;
  std::size_t correct = 0;
};

/// Records forward and loss for a group of videos on `tape`. Returns the loss
/// node; `stats` receives the scalar terms and accuracy counts.
template <typename T>
Var<T> batch_loss(Tape<T>& tape, Model<T>& model, const std::vector<const PreparedVideo<T>*>& videos,
                  const std::vector<const std::vector<ProposalTarget>*>& targets, const HeadConfig& heads,
                  BatchLoss<T>* stats = nullptr) {
  std::vector<HeadOutputs<T>> outputs;
  std::vector<ProposalTarget> flat;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    auto out = model.forward(tape, *videos[v]);
    outputs.insert(outputs.end(), out.begin(), out.end());
    flat.insert(flat.end(), targets[v]->begin(), targets[v]->end());
  }
  const int classes = model.config().num_classes;
  const LossTerms<T> terms = total_loss(tape, outputs, flat, classes, heads.lambda_comp, heads.lambda_reg);
  if (stats) {
    stats->total = static_cast<double>(terms.total.scalar());
    stats->cls = static_cast<double>(terms.cls.scalar());
    stats->comp = static_cast<double>(terms.comp.scalar());
    stats->reg = static_cast<double>(terms.reg.scalar());
    stats->proposals = outputs.size();
    stats->correct = 0;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      const auto& logits = outputs[i].cls_logits.value().data();
      const auto best = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
      if (best == flat[i].label) ++stats->correct;
    }
  }
  return terms.total;
}

template <typename T>
struct TrainResult {
  Checkpoint<T> checkpoint;
  std::vector<EpochMetrics> log;
};

/// Per-video batching with SGD + momentum and the step schedule. Video order
/// is reshuffled each epoch from (seed, epoch); everything runs on one thread,
/// so equal inputs give bit-identical results. `resume`, when given, must come
/// from a run with the same model configuration.
template <typename T>
TrainResult<T> train(const Config& config, const Dataset<T>& data, const Checkpoint<T>* resume = nullptr,
                     const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
  config.validate();
  if (data.num_classes > config.model.num_classes) {
    throw ConfigError("dataset has " + std::to_string(data.num_classes) + " classes, config allows " +
                      std::to_string(config.model.num_classes));
  }
  TrainResult<T> result;
  Checkpoint<T>& ckpt = result.checkpoint;
  ckpt.config = config;
  SgdMomentum<T> sgd(config.optimizer.momentum);
  int start_epoch = 1;
  if (resume) {
    if (resume->config.model_hash() != config.model_hash()) {
      throw ConfigError("checkpoint was trained with a different model configuration");
    }
    ckpt.model = resume->model;
    sgd.velocity() = resume->velocity;
    start_epoch = resume->epoch + 1;
  } else {
    ckpt.model = Model<T>(config.model, config.seed);
  }
  Model<T>& model = ckpt.model;
  for (const auto& v : data.videos) {
    if (static_cast<int>(v.features.dim()) != config.model.feature_dim) {
      throw ConfigError("video " + v.features.video_id + " has feature dimension " + std::to_string(v.features.dim()) +
                        ", config expects " + std::to_string(config.model.feature_dim));
    }
  }

  const auto prepared = prepare_dataset(data, config.model.theta_near);
  std::vector<std::vector<ProposalTarget>> targets;
  std::vector<std::size_t> usable;
  for (std::size_t v = 0; v < data.videos.size(); ++v) {
    targets.push_back(assign_targets(data.videos[v].proposals, data.videos[v].ground_truth, config.model.num_classes,
                                     config.heads.fg_tiou, config.heads.complete_tiou));
    if (!data.videos[v].proposals.empty()) usable.push_back(v);
  }
  if (usable.empty()) throw ContractError("train: no video has proposals");

  const auto params = model.parameters();
  const std::size_t batch = static_cast<std::size_t>(config.optimizer.batch_size);
  for (int epoch = start_epoch; epoch <= config.optimizer.epochs; ++epoch) {
    auto order = usable;
    auto rng = seeded_engine(config.seed, streams::batch_order + (static_cast<std::uint64_t>(epoch) << 8));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

    const double lr = lr_at_epoch(config.optimizer, epoch);
    EpochMetrics m;
    m.epoch = epoch;
    std::size_t seen = 0, correct = 0;
    for (std::size_t b = 0, batch_index = 0; b < order.size(); b += batch, ++batch_index) {
      std::vector<const PreparedVideo<T>*> vids;
      std::vector<const std::vector<ProposalTarget>*> tgts;
      for (std::size_t k = b; k < std::min(order.size(), b + batch); ++k) {
        vids.push_back(&prepared[order[k]]);
        tgts.push_back(&targets[order[k]]);
      }
      Tape<T> tape;
      BatchLoss<T> stats;
      model.zero_grad();
      const Var<T> loss = batch_loss(tape, model, vids, tgts, config.heads, &stats);
      if (!std::isfinite(stats.total)) {
        std::string ids;
        for (const auto* v : vids) ids += (ids.empty() ? "" : ",") + v->video->video_id;
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                             std::to_string(batch_index) + " (videos " + ids + ")");
      }
      tape.backward(loss);
      sgd.step(params, lr);
      const double w = static_cast<double>(stats.proposals);
      m.loss_cls += stats.cls * w;
      m.loss_comp += stats.comp * w;
      m.loss_reg += stats.reg * w;
      seen += stats.proposals;
      correct += stats.correct;
    }
    m.loss_cls /= static_cast<double>(seen);
    m.loss_comp /= static_cast<double>(seen);
    m.loss_reg /= static_cast<double>(seen);
    m.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
    result.log.push_back(m);
    ckpt.epoch = epoch;
    if (on_epoch) on_epoch(m);
  }
  ckpt.velocity = sgd.velocity();
  return result;
}

/// Fraction of proposals whose arg-max class (including background) equals
/// the assigned label.
template <typename T>
double classification_accuracy(Model<T>& model, const Dataset<T>& data, const Config& config) {
  std::size_t total = 0, correct = 0;
  for (const auto& v : data.videos) {
    if (v.proposals.empty()) continue;
    const auto pv = prepare_video(v.features, v.proposals, config.model.theta_near);
    const auto tg = assign_targets(v.proposals, v.ground_truth, config.model.num_classes, config.heads.fg_tiou,
                                   config.heads.complete_tiou);
    Tape<T> tape;
    BatchLoss<T> stats;
    batch_loss<T>(tape, model, {&pv}, {&tg}, config.heads, &stats);
    total += stats.proposals;
    correct += stats.correct;
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace contextloc
