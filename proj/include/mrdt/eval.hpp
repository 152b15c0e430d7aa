// Copyright (c) 2026 The dialog-reader Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mrdt/model.hpp"
#include "mrdt/taskgen.hpp"

namespace mrdt {

struct SlotScore {
  Task task = Task::factoid;
  std::string slot;
  std::size_t n = 0;
  std::size_t correct = 0;
  std::size_t unanswerable = 0;  // gold label missing from the answer vocabulary
  // Restricted to samples whose gold label is not "none".
  std::size_t n_informed = 0;
  std::size_t correct_informed = 0;
  std::map<std::string, std::map<std::string, std::size_t>> confusion;  // gold -> predicted -> n

  double accuracy() const { return n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0; }
  double informed_accuracy() const {
    return n_informed ? static_cast<double>(correct_informed) / static_cast<double>(n_informed) : 0.0;
  }
  std::size_t incorrect() const { return n - correct - unanswerable; }
};

struct JointScore {
  std::size_t groups = 0;
  std::size_t correct = 0;
  double accuracy() const { return groups ? static_cast<double>(correct) / static_cast<double>(groups) : 0.0; }
};

struct EvalReport {
  std::vector<SlotScore> cells;  // one per (task, slot), in first-seen order
  std::optional<JointScore> joint;

  const SlotScore* find(Task task, std::string_view slot) const;
};

/// Predicted label for every sample (empty context yields an error).
std::vector<std::string> predict_labels(const ModelBundle& model, std::span<const QASample> samples,
                                        std::size_t workers = 1);

/// Scores predictions for one (task, slot) cell; samples may span several
/// cells, in which case the counts are pooled.
SlotScore score_predictions(std::span<const QASample> samples,
                            std::span<const std::string> predictions,
                            const AnswerVocabulary& answers);

double slot_accuracy(const ModelBundle& model, std::span<const QASample> samples,
                     std::size_t* unanswerable = nullptr, std::size_t workers = 1);

/// Fraction of (dialog, prefix) groups whose every slot is predicted right.
/// Each group must hold exactly one sample per slot in `slots`.
JointScore joint_accuracy(std::span<const QASample> factoid, std::span<const std::string> predictions,
                          const std::vector<std::string>& slots);
JointScore joint_accuracy(const ModelBundle& model, std::span<const QASample> factoid,
                          const std::vector<std::string>& slots, std::size_t workers = 1);

/// Per-cell scores for a mixed sample set; joint accuracy is added when the
/// set contains factoid samples covering every slot.
EvalReport evaluate(const ModelBundle& model, std::span<const QASample> samples,
                    const std::vector<std::string>& slots, std::size_t workers = 1);

struct AttentionReport {
  std::vector<std::string> utterances;          // dialog order
  std::vector<std::vector<std::optional<double>>> weights;  // [row][hop]; empty when dropped
  std::string question;
  std::string predicted;
  std::size_t first_hop = 1;  // label of weights column 0

  std::string text() const;
  std::string csv() const;
};

AttentionReport attention_report(const ModelBundle& model, const QASample& sample);

/// Hit when, for some hop, the attention argmax lands on the supporting fact.
/// Samples without a supporting fact are excluded. Ties are broken uniformly
/// with `tie_rng` when given, otherwise by lowest memory index.
double hit_rate_from_traces(std::span<const QASample> samples,
                            std::span<const AttentionTrace> traces,
                            std::mt19937_64* tie_rng = nullptr);

double supporting_fact_hit_rate(const ModelBundle& model, std::span<const QASample> samples,
                                std::mt19937_64* tie_rng = nullptr);

}  // namespace mrdt
