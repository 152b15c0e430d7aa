// Copyright (c) 2026 The dialog-reader Authors
// SPDX-License-Identifier: Apache-2.0

#include "mrdt/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "mrdt/error.hpp"

namespace mrdt {

std::string_view tying_name(Tying t) { return t == Tying::adjacent ? "adjacent" : "layerwise"; }

std::optional<Tying> parse_tying(std::string_view name) {
  if (name == "adjacent") return Tying::adjacent;
  if (name == "layerwise" || name == "layer-wise") return Tying::layerwise;
  return std::nullopt;
}

void ModelConfig::validate() const {
  if (dim < 1) throw InvalidArgument("model dimension must be >= 1");
  if (hops < 1) throw InvalidArgument("hop count must be >= 1");
  if (memory_capacity < 1) throw InvalidArgument("memory capacity must be >= 1");
  if (answer_size < 1) throw InvalidArgument("answer vocabulary is empty");
  if (vocab_size < 2) throw InvalidArgument("vocabulary must hold at least NULL and UNK");
}

// ---------------------------------------------------------------------------
// MemN2NParams

MemN2NParams::MemN2NParams(const ModelConfig& config, std::vector<std::uint32_t> answer_columns)
    : config_(config), answer_columns_(std::move(answer_columns)) {
  config_.validate();
  const std::size_t d = config_.dim;
  const std::size_t K = config_.hops;
  const std::size_t V = config_.vocab_size;
  const std::size_t M = config_.memory_capacity;
  if (config_.tying == Tying::adjacent) {
    if (answer_columns_.size() != config_.answer_size)
      throw InvalidArgument(fmt::format("answer column map has {} entries for {} answers",
                                        answer_columns_.size(), config_.answer_size));
    for (auto c : answer_columns_)
      if (c >= V || c == Vocabulary::kNull)
        throw InvalidArgument(fmt::format("answer column {} outside vocabulary of size {}", c, V));
  }

  storages_.push_back({"B", Matrix(V, d)});
  if (config_.tying == Tying::adjacent) {
    for (std::size_t j = 0; j <= K; ++j) storages_.push_back({fmt::format("E{}", j), Matrix(V, d)});
    for (std::size_t j = 0; j <= K; ++j) storages_.push_back({fmt::format("T{}", j), Matrix(M, d)});
  } else {
    storages_.push_back({"A", Matrix(V, d)});
    storages_.push_back({"C", Matrix(V, d)});
    storages_.push_back({"TA", Matrix(M, d)});
    storages_.push_back({"TC", Matrix(M, d)});
    storages_.push_back({"W", Matrix(config_.answer_size, d)});
  }
}

std::size_t MemN2NParams::input_storage(std::size_t hop) const {
  return config_.tying == Tying::adjacent ? 1 + hop : 1;
}
std::size_t MemN2NParams::output_storage(std::size_t hop) const {
  return config_.tying == Tying::adjacent ? 2 + hop : 2;
}
std::size_t MemN2NParams::input_time_storage(std::size_t hop) const {
  return config_.tying == Tying::adjacent ? config_.hops + 2 + hop : 3;
}
std::size_t MemN2NParams::output_time_storage(std::size_t hop) const {
  return config_.tying == Tying::adjacent ? config_.hops + 3 + hop : 4;
}
std::size_t MemN2NParams::answer_storage() const {
  return config_.tying == Tying::adjacent ? 1 + config_.hops : 5;
}

bool MemN2NParams::is_embedding_storage(std::size_t s) const {
  if (config_.tying == Tying::adjacent) return s <= config_.hops + 1;
  return s <= 2;
}

std::vector<std::pair<std::string, std::string>> MemN2NParams::role_table() const {
  std::vector<std::pair<std::string, std::string>> roles;
  roles.emplace_back("B", storages_[question_storage()].name);
  for (std::size_t k = 0; k < config_.hops; ++k) {
    roles.emplace_back(fmt::format("A{}", k + 1), storages_[input_storage(k)].name);
    roles.emplace_back(fmt::format("C{}", k + 1), storages_[output_storage(k)].name);
    roles.emplace_back(fmt::format("TA{}", k + 1), storages_[input_time_storage(k)].name);
    roles.emplace_back(fmt::format("TC{}", k + 1), storages_[output_time_storage(k)].name);
  }
  roles.emplace_back("W", answer_is_tied() ? storages_[answer_storage()].name + "^T"
                                           : storages_[answer_storage()].name);
  return roles;
}

void MemN2NParams::zero_null_embeddings() {
  for (std::size_t s = 0; s < storages_.size(); ++s)
    if (is_embedding_storage(s))
      std::ranges::fill(storages_[s].value.row(Vocabulary::kNull), 0.0);
}

bool MemN2NParams::all_finite() const {
  for (const auto& s : storages_)
    for (double v : s.value.values())
      if (!std::isfinite(v)) return false;
  return true;
}

std::size_t MemN2NParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& s : storages_) n += s.value.size();
  return n;
}

MemN2NParams init_params(const ModelConfig& config, std::vector<std::uint32_t> answer_columns,
                         std::mt19937_64& rng, const Matrix* pretrained, double sigma) {
  MemN2NParams params(config, std::move(answer_columns));
  if (pretrained && (pretrained->rows() != config.dim || pretrained->cols() != config.vocab_size))
    throw InvalidArgument(fmt::format(
        "pretrained embedding matrix is {}x{}, expected {}x{}", pretrained->rows(),
        pretrained->cols(), config.dim, config.vocab_size));

  std::normal_distribution<double> gauss(0.0, sigma);
  for (auto& s : params.storages())
    for (double& v : s.value.values()) v = gauss(rng);

  if (pretrained) {
    for (Matrix* target : {&params.A(0), &params.B()})
      for (std::size_t j = 0; j < config.vocab_size; ++j)
        for (std::size_t r = 0; r < config.dim; ++r) (*target)(j, r) = (*pretrained)(r, j);
  }
  params.zero_null_embeddings();
  return params;
}

// ---------------------------------------------------------------------------
// Forward pass

EncodedSample encode_sample(const QASample& sample, const Vocabulary& vocab,
                            const AnswerVocabulary& answers) {
  EncodedSample e;
  e.context.reserve(sample.context.size());
  for (const auto& utt : sample.context) e.context.push_back(encode_bow(utt, vocab));
  e.question = encode_bow(sample.question, vocab);
  e.gold = answers.find(sample.answer);
  e.supporting_fact = sample.supporting_fact;
  return e;
}

namespace {

void add_bag(std::span<double> out, const Matrix& embedding, const BagOfWords& bag) {
  for (const auto& [token, count] : bag.counts) {
    auto row = embedding.row(token);
    const double c = count;
    for (std::size_t r = 0; r < out.size(); ++r) out[r] += c * row[r];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::vector<double> softmax(std::span<const double> x) {
  std::vector<double> out(x.size());
  if (x.empty()) return out;
  double mx = *std::max_element(x.begin(), x.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += out[i] = std::exp(x[i] - mx);
  for (double& v : out) v /= sum;
  return out;
}

MemoryEncoding encode_context(const MemN2NParams& params, std::span<const BagOfWords> context,
                              std::size_t hop) {
  const auto& cfg = params.config();
  const std::size_t n = std::min(context.size(), cfg.memory_capacity);
  MemoryEncoding enc{Matrix(n, cfg.dim), Matrix(n, cfg.dim)};
  const Matrix& A = params.A(hop);
  const Matrix& C = params.C(hop);
  const Matrix& TA = params.TA(hop);
  const Matrix& TC = params.TC(hop);
  for (std::size_t i = 0; i < n; ++i) {
    const BagOfWords& bag = context[context.size() - 1 - i];
    auto m = enc.m.row(i);
    auto c = enc.c.row(i);
    std::ranges::copy(TA.row(i), m.begin());
    std::ranges::copy(TC.row(i), c.begin());
    add_bag(m, A, bag);
    add_bag(c, C, bag);
  }
  return enc;
}

std::vector<double> attention(std::span<const double> u, const Matrix& memories, bool linear) {
  std::vector<double> scores(memories.rows());
  for (std::size_t i = 0; i < memories.rows(); ++i) scores[i] = dot(u, memories.row(i));
  return linear ? scores : softmax(scores);
}

HopResult hop(std::span<const double> u, const MemoryEncoding& memory, bool linear) {
  HopResult r;
  r.p = attention(u, memory.m, linear);
  r.o.assign(u.size(), 0.0);
  for (std::size_t i = 0; i < memory.c.rows(); ++i) {
    auto c = memory.c.row(i);
    for (std::size_t j = 0; j < u.size(); ++j) r.o[j] += r.p[i] * c[j];
  }
  r.u_next.resize(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) r.u_next[j] = r.o[j] + u[j];
  return r;
}

std::optional<std::size_t> AttentionTrace::memory_of_position(std::size_t position,
                                                              std::size_t context_size) const {
  if (position == 0 || position > context_size) return std::nullopt;
  std::size_t mem = context_size - position;
  if (mem >= memories) return std::nullopt;
  return mem;
}

ForwardResult forward(const MemN2NParams& params, std::span<const BagOfWords> context,
                      const BagOfWords& question) {
  if (context.empty()) throw InvalidArgument("no memories: context is empty");
  const auto& cfg = params.config();
  ForwardResult result;
  auto& trace = result.trace;
  trace.memories = std::min(context.size(), cfg.memory_capacity);
  trace.dropped = context.size() - trace.memories;

  std::vector<double> u(cfg.dim, 0.0);
  add_bag(u, params.B(), question);
  for (std::size_t k = 0; k < cfg.hops; ++k) {
    auto memory = encode_context(params, context, k);
    auto h = hop(u, memory, cfg.linear_attention);
    trace.u.push_back(std::move(u));
    trace.o.push_back(std::move(h.o));
    trace.p.push_back(std::move(h.p));
    u = std::move(h.u_next);
  }
  trace.logits.resize(cfg.answer_size);
  for (std::size_t r = 0; r < cfg.answer_size; ++r) trace.logits[r] = dot(params.W_row(r), u);
  trace.answer = softmax(trace.logits);
  result.answer = trace.answer;
  return result;
}

std::uint32_t argmax_label(std::span<const double> distribution) {
  if (distribution.empty()) throw InvalidArgument("argmax of an empty distribution");
  std::size_t best = 0;
  for (std::size_t i = 1; i < distribution.size(); ++i)
    if (distribution[i] > distribution[best]) best = i;
  return static_cast<std::uint32_t>(best);
}

std::uint32_t predict(const MemN2NParams& params, const EncodedSample& sample) {
  return argmax_label(forward(params, sample.context, sample.question).answer);
}

}  // namespace mrdt
