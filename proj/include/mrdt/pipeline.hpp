// Copyright (c) 2026 The dialog-reader Authors
// SPDX-License-Identifier: Apache-2.0
//
// Subcommand orchestration shared by the C API and the command-line tool.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mrdt/corpus.hpp"
#include "mrdt/eval.hpp"
#include "mrdt/model.hpp"
#include "mrdt/taskgen.hpp"
#include "mrdt/training.hpp"

namespace mrdt {

/// Flat key=value run configuration. Keys are the long flag names
/// ("dim", "augment-r1", ...). Later assignments override earlier ones, so
/// callers apply defaults, then a config file, then command-line flags.
class RunConfig {
 public:
  RunConfig();

  void set(std::string_view key, std::string value);
  const std::string& get(std::string_view key) const;
  bool is_set(std::string_view key) const { return !get(key).empty(); }

  std::int64_t get_int(std::string_view key) const;
  std::uint64_t get_uint(std::string_view key) const;
  double get_double(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  std::vector<std::string> get_list(std::string_view key) const;

  /// "key=value" lines; '#' comments and blank lines are ignored.
  void parse(std::istream& in, std::string_view origin = "config");
  void load_file(const std::string& path);
  /// Every key in sorted order, one "key=value" per line.
  std::string dump() const;

  static const std::vector<std::string>& keys();

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

/// Shipped slot ontology (area 5, food 91, pricerange 3 values).
const Ontology& default_ontology();

Ontology resolve_ontology(const RunConfig& config);
TrainConfig train_config_from(const RunConfig& config);

/// Input vocabulary for a model: training contexts and questions, every
/// question form over the ontology, then answer labels (so adjacent tying can
/// map W rows to embedding rows). Returns the answer -> vocabulary row map.
Vocabulary model_vocabulary(std::span<const QASample> train, const Ontology& ontology,
                            const AnswerVocabulary& answers,
                            std::vector<std::uint32_t>& answer_columns);

/// Everything needed to train on a task file: vocabularies, encoded split.
TrainData prepare_training_data(std::span<const QASample> samples, const Ontology& ontology,
                                double validation_fraction, std::uint64_t seed);

/// Errors when the samples' questions use tokens the model never saw.
void check_vocabulary_compatible(const ModelBundle& model, std::span<const QASample> samples);

std::string cmd_convert(const RunConfig& config);
std::string cmd_train(const RunConfig& config);
std::string cmd_eval(const RunConfig& config);
std::string cmd_inspect(const RunConfig& config);

/// Table with one row per slot and one column per task (+ joint for factoid).
std::string format_eval_table(const std::vector<EvalReport>& reports,
                              const std::vector<std::string>& slots);

}  // namespace mrdt
