// Copyright (c) 2026 The dialog-reader Authors
// SPDX-License-Identifier: Apache-2.0

#include "mrdt/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "mrdt/error.hpp"

namespace mrdt {

std::string_view reduction_name(LossReduction r) {
  return r == LossReduction::sum ? "sum" : "mean";
}

std::optional<LossReduction> parse_reduction(std::string_view name) {
  if (name == "sum") return LossReduction::sum;
  if (name == "mean") return LossReduction::mean;
  return std::nullopt;
}

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (decay_every == 0) throw InvalidArgument("decay interval must be positive");
  if (!(decay_factor > 0.0)) throw InvalidArgument("decay factor must be positive");
  if (max_epochs == 0) throw InvalidArgument("epoch count must be positive");
  if (linear_start_epochs >= max_epochs)
    throw InvalidArgument(fmt::format("linear start ({} epochs) must end before the last epoch ({})",
                                      linear_start_epochs, max_epochs));
  if (batch_size == 0) throw InvalidArgument("batch size must be positive");
  if (!(clip_norm > 0.0)) throw InvalidArgument("clipping norm must be positive");
  if (dim == 0) throw InvalidArgument("embedding size must be positive");
  if (hops == 0) throw InvalidArgument("hop count must be positive");
}

void TrainHistory::write_log(std::ostream& out) const {
  out << "epoch,lr,linear,train_loss,val_loss,val_acc\n";
  for (const auto& e : epochs)
    out << fmt::format("{},{:.9g},{},{:.6f},{:.6f},{:.6f}\n", e.epoch, e.lr, e.linear ? 1 : 0,
                       e.train_loss, e.val_loss, e.val_acc);
}

// ---------------------------------------------------------------------------
// Gradients

Gradients::Gradients(const MemN2NParams& params) {
  for (const auto& s : params.storages()) {
    grads_.emplace_back(s.value.rows(), s.value.cols());
    touched_.emplace_back();
    flags_.emplace_back(s.value.rows(), 0);
  }
}

std::span<double> Gradients::row(std::size_t s, std::size_t r) {
  if (!flags_[s][r]) {
    flags_[s][r] = 1;
    touched_[s].push_back(r);
  }
  return grads_[s].row(r);
}

void Gradients::mark_all() {
  for (std::size_t s = 0; s < grads_.size(); ++s)
    for (std::size_t r = 0; r < grads_[s].rows(); ++r) row(s, r);
}

double Gradients::global_norm() const {
  double sq = 0.0;
  for (std::size_t s = 0; s < grads_.size(); ++s)
    for (auto r : touched_[s])
      for (double v : grads_[s].row(r)) sq += v * v;
  return std::sqrt(sq);
}

void Gradients::scale(double factor) {
  for (std::size_t s = 0; s < grads_.size(); ++s)
    for (auto r : touched_[s])
      for (double& v : grads_[s].row(r)) v *= factor;
}

void Gradients::clear() {
  for (std::size_t s = 0; s < grads_.size(); ++s) {
    for (auto r : touched_[s]) {
      std::ranges::fill(grads_[s].row(r), 0.0);
      flags_[s][r] = 0;
    }
    touched_[s].clear();
  }
}

// ---------------------------------------------------------------------------
// Loss and backward

double cross_entropy_loss(std::span<const double> distribution, std::size_t gold) {
  if (gold >= distribution.size())
    throw InvalidArgument(fmt::format("gold index {} outside distribution of size {}", gold,
                                      distribution.size()));
  return -std::log(distribution[gold] + kLossEpsilon);
}

namespace {

struct Cache {
  std::vector<MemoryEncoding> memory;
  std::vector<std::vector<double>> u;  // u[k] input of hop k; u[K] final
  std::vector<std::vector<double>> p;
  std::vector<double> answer;
};

Cache forward_cached(const MemN2NParams& params, const EncodedSample& s, bool linear) {
  const auto& cfg = params.config();
  if (s.context.empty()) throw InvalidArgument("no memories: context is empty");
  Cache cache;
  std::vector<double> u(cfg.dim, 0.0);
  for (const auto& [tok, cnt] : s.question.counts) {
    auto row = params.B().row(tok);
    for (std::size_t j = 0; j < cfg.dim; ++j) u[j] += cnt * row[j];
  }
  for (std::size_t k = 0; k < cfg.hops; ++k) {
    auto memory = encode_context(params, s.context, k);
    auto h = hop(u, memory, linear);
    cache.memory.push_back(std::move(memory));
    cache.u.push_back(std::move(u));
    cache.p.push_back(std::move(h.p));
    u = std::move(h.u_next);
  }
  std::vector<double> logits(cfg.answer_size);
  for (std::size_t r = 0; r < cfg.answer_size; ++r) {
    auto w = params.W_row(r);
    double z = 0.0;
    for (std::size_t j = 0; j < cfg.dim; ++j) z += w[j] * u[j];
    logits[r] = z;
  }
  cache.u.push_back(std::move(u));
  cache.answer = softmax(logits);
  return cache;
}

/// Row contributions of one sample, replayed into the batch gradient in order.
struct SampleGrad {
  struct Entry {
    std::uint32_t storage;
    std::uint32_t row;
    std::size_t offset;
  };
  std::vector<Entry> entries;
  std::vector<double> values;
  double loss = 0.0;
  bool used = false;

  std::span<double> add(std::size_t storage, std::size_t row, std::size_t dim) {
    entries.push_back({static_cast<std::uint32_t>(storage), static_cast<std::uint32_t>(row), values.size()});
    values.resize(values.size() + dim, 0.0);
    return {values.data() + entries.back().offset, dim};
  }
};

void sample_backward(const MemN2NParams& params, const EncodedSample& s, bool linear, SampleGrad& out) {
  if (!s.gold) return;
  const auto& cfg = params.config();
  const std::size_t d = cfg.dim;
  const std::size_t gold = *s.gold;
  Cache cache = forward_cached(params, s, linear);
  out.used = true;
  out.loss = cross_entropy_loss(cache.answer, gold);

  // dL/dz_r for L = -log(a_g + eps).
  const double ag = cache.answer[gold];
  const double coef = ag / (ag + kLossEpsilon);
  const auto& h = cache.u.back();
  std::vector<double> du(d, 0.0);
  const std::size_t w_storage = params.answer_storage();
  for (std::size_t r = 0; r < cfg.answer_size; ++r) {
    double dz = coef * (cache.answer[r] - (r == gold ? 1.0 : 0.0));
    auto w = params.W_row(r);
    auto gw = out.add(w_storage, params.answer_row_index(r), d);
    for (std::size_t j = 0; j < d; ++j) {
      gw[j] = dz * h[j];
      du[j] += dz * w[j];
    }
  }

  const std::size_t n = cache.p.front().size();
  std::vector<double> dp(n), ds(n), dm(d), dc(d);
  for (std::size_t kk = cfg.hops; kk-- > 0;) {
    const auto& mem = cache.memory[kk];
    const auto& p = cache.p[kk];
    const auto& u = cache.u[kk];
    // u^{k+1} = u^k + o^k, so do = du and du^k starts as du.
    const std::vector<double> dout = du;
    for (std::size_t i = 0; i < n; ++i) {
      auto c = mem.c.row(i);
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += dout[j] * c[j];
      dp[i] = acc;
    }
    if (linear) {
      ds = dp;
    } else {
      double inner = 0.0;
      for (std::size_t i = 0; i < n; ++i) inner += p[i] * dp[i];
      for (std::size_t i = 0; i < n; ++i) ds[i] = p[i] * (dp[i] - inner);
    }
    const std::size_t sa = params.input_storage(kk), sc = params.output_storage(kk);
    const std::size_t sta = params.input_time_storage(kk), stc = params.output_time_storage(kk);
    for (std::size_t i = 0; i < n; ++i) {
      auto m = mem.m.row(i);
      for (std::size_t j = 0; j < d; ++j) du[j] += ds[i] * m[j];
      for (std::size_t j = 0; j < d; ++j) {
        dm[j] = ds[i] * u[j];
        dc[j] = p[i] * dout[j];
      }
      std::ranges::copy(dm, out.add(sta, i, d).begin());
      std::ranges::copy(dc, out.add(stc, i, d).begin());
      const BagOfWords& bag = s.context[s.context.size() - 1 - i];
      for (const auto& [tok, cnt] : bag.counts) {
        auto ga = out.add(sa, tok, d);
        for (std::size_t j = 0; j < d; ++j) ga[j] = cnt * dm[j];
        auto gc = out.add(sc, tok, d);
        for (std::size_t j = 0; j < d; ++j) gc[j] = cnt * dc[j];
      }
    }
  }
  for (const auto& [tok, cnt] : s.question.counts) {
    auto gb = out.add(params.question_storage(), tok, d);
    for (std::size_t j = 0; j < d; ++j) gb[j] = cnt * du[j];
  }
}

}  // namespace

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      try {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

BackwardResult backward(const MemN2NParams& params, std::span<const EncodedSample* const> batch,
                        bool linear, std::size_t workers) {
  if (batch.empty()) throw InvalidArgument("backward needs a nonempty batch");
  std::vector<SampleGrad> per_sample(batch.size());
  parallel_for(batch.size(), workers,
               [&](std::size_t i) { sample_backward(params, *batch[i], linear, per_sample[i]); });

  BackwardResult result{0.0, Gradients(params)};
  std::size_t used = 0;
  for (const auto& sg : per_sample) {
    if (!sg.used) continue;
    ++used;
    result.loss += sg.loss;
    const std::size_t d = params.config().dim;
    for (const auto& e : sg.entries) {
      auto row = result.grads.row(e.storage, e.row);
      for (std::size_t j = 0; j < d; ++j) row[j] += sg.values[e.offset + j];
    }
  }
  if (used > 0) {
    result.loss /= static_cast<double>(used);
    result.grads.scale(1.0 / static_cast<double>(used));
  }
  return result;
}

BackwardResult backward(const MemN2NParams& params, std::span<const EncodedSample> batch,
                        bool linear, std::size_t workers) {
  std::vector<const EncodedSample*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& s : batch) ptrs.push_back(&s);
  return backward(params, std::span<const EncodedSample* const>(ptrs), linear, workers);
}

void clip_gradients(Gradients& grads, double max_norm) {
  double norm = grads.global_norm();
  if (norm > max_norm) grads.scale(max_norm / norm);
}

double lr_schedule(std::size_t epoch, const TrainConfig& config) {
  if (epoch < 1 || epoch > config.max_epochs)
    throw InvalidArgument(fmt::format("epoch {} outside 1..{}", epoch, config.max_epochs));
  std::size_t halvings = (epoch - 1) / config.decay_every;
  return config.lr0 * std::pow(config.decay_factor, static_cast<double>(halvings));
}

void sgd_step(MemN2NParams& params, const Gradients& grads, double lr) {
  auto& storages = params.storages();
  for (std::size_t s = 0; s < storages.size(); ++s) {
    auto& value = storages[s].value;
    for (auto r : grads.touched_rows(s)) {
      auto target = value.row(r);
      auto g = grads[s].row(r);
      for (std::size_t j = 0; j < target.size(); ++j) target[j] -= lr * g[j];
    }
  }
  params.zero_null_embeddings();
}

double mean_loss(const MemN2NParams& params, std::span<const EncodedSample> samples,
                 std::size_t workers) {
  std::vector<double> losses(samples.size(), std::nan(""));
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    const auto& s = samples[i];
    if (!s.gold) return;
    losses[i] = cross_entropy_loss(forward(params, s.context, s.question).answer, *s.gold);
  });
  double total = 0.0;
  std::size_t n = 0;
  for (double l : losses)
    if (!std::isnan(l)) {
      total += l;
      ++n;
    }
  return n ? total / static_cast<double>(n) : 0.0;
}

namespace {

double accuracy(const MemN2NParams& params, std::span<const EncodedSample> samples,
                std::size_t workers) {
  if (samples.empty()) return 0.0;
  std::vector<char> hit(samples.size(), 0);
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    const auto& s = samples[i];
    hit[i] = s.gold && predict(params, s) == *s.gold;
  });
  return static_cast<double>(std::count(hit.begin(), hit.end(), 1)) / static_cast<double>(samples.size());
}

}  // namespace

TrainResult train(const TrainData& data, const TrainConfig& config, const Matrix* pretrained,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (data.train.empty()) throw InvalidArgument("training set is empty");

  std::size_t longest = 0;
  for (const auto& s : data.train) longest = std::max(longest, s.context.size());
  ModelConfig mc;
  mc.dim = config.dim;
  mc.hops = config.hops;
  mc.tying = config.tying;
  mc.memory_capacity = config.memory_capacity ? config.memory_capacity : std::max<std::size_t>(1, longest);
  mc.answer_size = data.answers.size();
  mc.vocab_size = data.vocab.size();

  std::mt19937_64 rng(config.seed);
  TrainResult result{init_params(mc, data.answer_columns, rng, pretrained, config.init_sigma), {}};
  MemN2NParams& params = result.params;
  MemN2NParams best = params;
  double best_acc = -1.0;

  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const EncodedSample*> batch;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr_schedule(epoch, config);
    rec.linear = epoch <= config.linear_start_epochs;
    params.config().linear_attention = rec.linear;

    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i)
        batch.push_back(&data.train[order[i]]);
      auto br = backward(params, batch, rec.linear, config.workers);
      if (config.reduction == LossReduction::sum) {
        auto answerable = std::count_if(batch.begin(), batch.end(), [](const EncodedSample* s) { return s->gold.has_value(); });
        br.grads.scale(static_cast<double>(answerable));
      }
      clip_gradients(br.grads, config.clip_norm);
      sgd_step(params, br.grads, rec.lr);
      loss_sum += br.loss * static_cast<double>(batch.size());
    }
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    if (!data.validation.empty()) {
      rec.val_loss = mean_loss(params, data.validation, config.workers);
      rec.val_acc = accuracy(params, data.validation, config.workers);
    }
    if (config.track_train_accuracy) rec.train_acc = accuracy(params, data.train, config.workers);

    // Only softmax-mode epochs are candidates; the linear phase is warm-up.
    bool improved = !rec.linear && (data.validation.empty() || rec.val_acc > best_acc);
    if (improved) {
      best_acc = rec.val_acc;
      best = params;
      result.history.best_epoch = epoch;
    }
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  result.params = std::move(best);
  return result;
}

// ---------------------------------------------------------------------------
// Finite-difference oracle

double gradient_check(const MemN2NParams& params, const EncodedSample& sample,
                      const Gradients& analytic, double h) {
  if (!sample.gold) throw InvalidArgument("gradient check needs a sample with a gold label");
  MemN2NParams probe = params;
  auto loss_at = [&] {
    return cross_entropy_loss(forward(probe, sample.context, sample.question).answer, *sample.gold);
  };
  double worst = 0.0;
  for (std::size_t s = 0; s < probe.storages().size(); ++s) {
    auto values = probe.storages()[s].value.values();
    auto grad = analytic[s].values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double plus = loss_at();
      values[i] = saved - h;
      const double minus = loss_at();
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = grad[i];
      const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

double gradient_check(const MemN2NParams& params, const EncodedSample& sample, double h) {
  auto br = backward(params, std::span<const EncodedSample>(&sample, 1),
                     params.config().linear_attention);
  return gradient_check(params, sample, br.grads, h);
}

}  // namespace mrdt
