// Copyright (c) 2026 The dialog-reader Authors
// SPDX-License-Identifier: Apache-2.0

#include "mrdt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "mrdt/error.hpp"
#include "mrdt/training.hpp"

namespace mrdt {

const SlotScore* EvalReport::find(Task task, std::string_view slot) const {
  for (const auto& c : cells)
    if (c.task == task && c.slot == slot) return &c;
  return nullptr;
}

std::vector<std::string> predict_labels(const ModelBundle& model, std::span<const QASample> samples,
                                        std::size_t workers) {
  std::vector<std::string> out(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    auto enc = encode_sample(samples[i], model.vocab, model.answers);
    out[i] = model.answers.label(predict(model.params, enc));
  });
  return out;
}

SlotScore score_predictions(std::span<const QASample> samples,
                            std::span<const std::string> predictions,
                            const AnswerVocabulary& answers) {
  if (samples.size() != predictions.size())
    throw InvalidArgument("prediction count differs from sample count");
  SlotScore score;
  if (!samples.empty()) {
    score.task = samples.front().task;
    score.slot = samples.front().slot;
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const bool answerable = answers.find(s.answer).has_value();
    const bool hit = answerable && predictions[i] == s.answer;
    ++score.n;
    if (hit) ++score.correct;
    if (!answerable) ++score.unanswerable;
    if (s.answer != kNoneLabel) {
      ++score.n_informed;
      if (hit) ++score.correct_informed;
    }
    ++score.confusion[s.answer][predictions[i]];
  }
  return score;
}

double slot_accuracy(const ModelBundle& model, std::span<const QASample> samples,
                     std::size_t* unanswerable, std::size_t workers) {
  if (samples.empty()) throw InvalidArgument("slot_accuracy needs at least one sample");
  auto preds = predict_labels(model, samples, workers);
  auto score = score_predictions(samples, preds, model.answers);
  if (unanswerable) *unanswerable = score.unanswerable;
  return score.accuracy();
}

JointScore joint_accuracy(std::span<const QASample> factoid, std::span<const std::string> predictions,
                          const std::vector<std::string>& slots) {
  if (factoid.size() != predictions.size())
    throw InvalidArgument("prediction count differs from sample count");
  struct Group {
    std::set<std::string> seen;
    bool all_correct = true;
  };
  std::vector<std::pair<std::string, std::size_t>> order;
  std::map<std::pair<std::string, std::size_t>, Group> groups;
  for (std::size_t i = 0; i < factoid.size(); ++i) {
    const auto& s = factoid[i];
    auto key = std::make_pair(s.dialog_id, s.prefix_length);
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) order.push_back(key);
    if (!it->second.seen.insert(s.slot).second)
      throw InvalidArgument(fmt::format("group ({}, prefix {}) has two samples for slot '{}'",
                                        key.first, key.second, s.slot));
    if (predictions[i] != s.answer) it->second.all_correct = false;
  }
  JointScore score;
  for (const auto& key : order) {
    const auto& g = groups.at(key);
    for (const auto& slot : slots)
      if (!g.seen.contains(slot))
        throw InvalidArgument(fmt::format("group ({}, prefix {}) is incomplete: no sample for slot '{}'",
                                          key.first, key.second, slot));
    if (g.seen.size() != slots.size())
      throw InvalidArgument(fmt::format("group ({}, prefix {}) has samples for unknown slots",
                                        key.first, key.second));
    ++score.groups;
    if (g.all_correct) ++score.correct;
  }
  return score;
}

JointScore joint_accuracy(const ModelBundle& model, std::span<const QASample> factoid,
                          const std::vector<std::string>& slots, std::size_t workers) {
  auto preds = predict_labels(model, factoid, workers);
  return joint_accuracy(factoid, preds, slots);
}

EvalReport evaluate(const ModelBundle& model, std::span<const QASample> samples,
                    const std::vector<std::string>& slots, std::size_t workers) {
  EvalReport report;
  auto preds = predict_labels(model, samples, workers);

  std::vector<std::pair<Task, std::string>> keys;
  std::map<std::pair<Task, std::string>, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto key = std::make_pair(samples[i].task, samples[i].slot);
    auto& m = members[key];
    if (m.empty()) keys.push_back(key);
    m.push_back(i);
  }
  for (const auto& key : keys) {
    std::vector<QASample> subset;
    std::vector<std::string> sub_preds;
    for (auto i : members[key]) {
      subset.push_back(samples[i]);
      sub_preds.push_back(preds[i]);
    }
    report.cells.push_back(score_predictions(subset, sub_preds, model.answers));
  }

  std::vector<QASample> factoid;
  std::vector<std::string> factoid_preds;
  std::set<std::string> covered;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].task != Task::factoid) continue;
    factoid.push_back(samples[i]);
    factoid_preds.push_back(preds[i]);
    covered.insert(samples[i].slot);
  }
  bool all_slots = !slots.empty() && std::ranges::all_of(slots, [&](const auto& s) { return covered.contains(s); });
  if (all_slots) report.joint = joint_accuracy(factoid, factoid_preds, slots);
  return report;
}

// ---------------------------------------------------------------------------
// Attention reports

AttentionReport attention_report(const ModelBundle& model, const QASample& sample) {
  auto enc = encode_sample(sample, model.vocab, model.answers);
  auto fr = forward(model.params, enc.context, enc.question);
  const auto& trace = fr.trace;
  AttentionReport rep;
  const std::size_t n = sample.context.size();
  for (std::size_t pos = 1; pos <= n; ++pos) {
    rep.utterances.push_back(join_tokens(sample.context[pos - 1]));
    std::vector<std::optional<double>> row;
    auto mem = trace.memory_of_position(pos, n);
    for (const auto& p : trace.p) row.push_back(mem ? std::optional<double>(p[*mem]) : std::nullopt);
    rep.weights.push_back(std::move(row));
  }
  rep.question = join_tokens(sample.question) + " ?";
  rep.predicted = model.answers.label(argmax_label(fr.answer));
  return rep;
}

std::string AttentionReport::text() const {
  const std::size_t hops = weights.empty() ? 0 : weights.front().size();
  std::size_t width = std::string_view("utterance").size();
  for (const auto& u : utterances) width = std::max(width, u.size());
  std::string out = fmt::format("{:>3}  {:<{}}", "#", "utterance", width);
  for (std::size_t k = 0; k < hops; ++k) out += fmt::format("  {:>6}", fmt::format("hop {}", k + first_hop));
  out += '\n';
  for (std::size_t r = 0; r < utterances.size(); ++r) {
    out += fmt::format("{:>3}  {:<{}}", r + 1, utterances[r], width);
    for (const auto& w : weights[r]) out += w ? fmt::format("  {:>6.2f}", *w) : fmt::format("  {:>6}", "-");
    out += '\n';
  }
  out += fmt::format("{} answer: {}\n", question, predicted);
  return out;
}

std::string AttentionReport::csv() const {
  const std::size_t hops = weights.empty() ? 0 : weights.front().size();
  std::string out = "position,utterance";
  for (std::size_t k = 0; k < hops; ++k) out += fmt::format(",hop{}", k + first_hop);
  out += '\n';
  for (std::size_t r = 0; r < utterances.size(); ++r) {
    out += fmt::format("{},{}", r + 1, utterances[r]);
    for (const auto& w : weights[r]) out += w ? fmt::format(",{:.6f}", *w) : std::string(",");
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Supporting-fact diagnostics

double hit_rate_from_traces(std::span<const QASample> samples,
                            std::span<const AttentionTrace> traces, std::mt19937_64* tie_rng) {
  if (samples.size() != traces.size()) throw InvalidArgument("trace count differs from sample count");
  std::size_t considered = 0, hits = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!s.supporting_fact) continue;
    ++considered;
    auto target = traces[i].memory_of_position(*s.supporting_fact, s.context.size());
    if (!target) continue;
    bool hit = false;
    for (const auto& p : traces[i].p) {
      double mx = *std::max_element(p.begin(), p.end());
      std::vector<std::size_t> best;
      for (std::size_t j = 0; j < p.size(); ++j)
        if (std::abs(p[j] - mx) <= 1e-12 * std::max(1.0, std::abs(mx))) best.push_back(j);
      std::size_t choice = best.front();
      if (tie_rng && best.size() > 1) {
        std::uniform_int_distribution<std::size_t> dist(0, best.size() - 1);
        choice = best[dist(*tie_rng)];
      }
      if (choice == *target) hit = true;  // no early exit: keeps rng consumption per hop fixed
    }
    if (hit) ++hits;
  }
  return considered ? static_cast<double>(hits) / static_cast<double>(considered) : 0.0;
}

double supporting_fact_hit_rate(const ModelBundle& model, std::span<const QASample> samples,
                                std::mt19937_64* tie_rng) {
  std::vector<AttentionTrace> traces;
  traces.reserve(samples.size());
  for (const auto& s : samples) {
    auto enc = encode_sample(s, model.vocab, model.answers);
    traces.push_back(forward(model.params, enc.context, enc.question).trace);
  }
  return hit_rate_from_traces(samples, traces, tie_rng);
}

}  // namespace mrdt
