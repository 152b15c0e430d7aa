// Copyright (c) 2026 The dialog-reader Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <span>
#include <vector>

#include "mrdt/model.hpp"

namespace mrdt {

/// How per-sample losses are combined within a mini-batch before the update.
/// `sum` follows the reference memory-network training code (the clipping
/// threshold then applies to the summed gradient); `mean` divides by the
/// number of answerable samples in the batch.
enum class LossReduction { sum, mean };

std::string_view reduction_name(LossReduction r);
std::optional<LossReduction> parse_reduction(std::string_view name);

struct TrainConfig {
  double lr0 = 0.005;
  std::size_t decay_every = 25;
  double decay_factor = 0.5;
  std::size_t max_epochs = 100;
  std::size_t linear_start_epochs = 20;
  std::size_t batch_size = 16;
  double clip_norm = 40.0;
  std::uint64_t seed = 1;
  std::size_t dim = 20;
  std::size_t hops = 5;
  Tying tying = Tying::adjacent;
  std::size_t memory_capacity = 0;  // 0: longest training context
  std::size_t workers = 1;
  double init_sigma = 0.1;
  bool track_train_accuracy = false;
  LossReduction reduction = LossReduction::sum;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  bool linear = false;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double train_acc = 0.0;  // only when track_train_accuracy
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // best softmax-mode epoch

  /// Header line, then "epoch,lr,linear,train_loss,val_loss,val_acc" per epoch.
  void write_log(std::ostream& out) const;
};

/// One gradient matrix per storage plus the rows touched since the last
/// clear, so sparse batches stay cheap on large vocabularies.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const MemN2NParams& params);

  std::size_t size() const { return grads_.size(); }
  Matrix& operator[](std::size_t s) { return grads_[s]; }
  const Matrix& operator[](std::size_t s) const { return grads_[s]; }

  std::span<double> row(std::size_t s, std::size_t r);
  const std::vector<std::size_t>& touched_rows(std::size_t s) const { return touched_[s]; }
  void mark_all();

  double global_norm() const;
  void scale(double factor);
  void clear();

 private:
  std::vector<Matrix> grads_;
  std::vector<std::vector<std::size_t>> touched_;
  std::vector<std::vector<char>> flags_;
};

/// -log(p[gold] + 1e-12).
double cross_entropy_loss(std::span<const double> distribution, std::size_t gold);

inline constexpr double kLossEpsilon = 1e-12;

struct BackwardResult {
  double loss = 0.0;
  Gradients grads;
};

/// Mean loss and its exact gradient over the batch. Samples without a gold
/// label are skipped. Per-sample gradients are summed in batch order.
BackwardResult backward(const MemN2NParams& params, std::span<const EncodedSample* const> batch,
                        bool linear, std::size_t workers = 1);
BackwardResult backward(const MemN2NParams& params, std::span<const EncodedSample> batch,
                        bool linear, std::size_t workers = 1);

/// Rescales to max_norm when the global L2 norm strictly exceeds it.
void clip_gradients(Gradients& grads, double max_norm);

double lr_schedule(std::size_t epoch, const TrainConfig& config);

/// theta -= lr * g over every storage, then NULL embedding rows are re-zeroed.
void sgd_step(MemN2NParams& params, const Gradients& grads, double lr);

struct TrainData {
  Vocabulary vocab;
  AnswerVocabulary answers;
  std::vector<std::uint32_t> answer_columns;
  std::vector<EncodedSample> train;
  std::vector<EncodedSample> validation;
};

struct TrainResult {
  MemN2NParams params;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(const TrainData& data, const TrainConfig& config,
                  const Matrix* pretrained = nullptr, const EpochCallback& on_epoch = {});

/// Mean loss over answerable samples.
double mean_loss(const MemN2NParams& params, std::span<const EncodedSample> samples,
                 std::size_t workers = 1);

/// Max over all parameter entries of |analytic - numeric| / max(1e-8, |a| + |n|)
/// using central differences with step h.
double gradient_check(const MemN2NParams& params, const EncodedSample& sample, double h = 1e-5);
double gradient_check(const MemN2NParams& params, const EncodedSample& sample,
                      const Gradients& analytic, double h = 1e-5);

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace mrdt
