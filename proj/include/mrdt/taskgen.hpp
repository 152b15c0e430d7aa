// Copyright (c) 2026 The dialog-reader Authors
// SPDX-License-Identifier: Apache-2.0
//
// Conversion of annotated dialogs into question-answering samples: subdialog
// expansion, the five question tasks, dialog augmentation, answer vocabulary,
// validation split and the numbered task-file format.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mrdt/corpus.hpp"

namespace mrdt {

enum class Task { factoid, yesno, indefinite, count, list };

inline constexpr Task kAllTasks[] = {Task::factoid, Task::yesno, Task::indefinite, Task::count,
                                     Task::list};

std::string_view task_name(Task task);
std::optional<Task> parse_task(std::string_view name);

inline constexpr std::string_view kNoneLabel = "none";
inline constexpr std::string_view kYes = "yes";
inline constexpr std::string_view kNo = "no";
inline constexpr std::string_view kMaybe = "maybe";

struct QASample {
  std::vector<Tokens> context;
  Tokens question;
  std::string answer;
  std::optional<std::size_t> supporting_fact;  // 1-based into context
  Task task = Task::factoid;
  std::string slot;
  std::string dialog_id;
  std::size_t prefix_length = 0;

  bool operator==(const QASample&) const = default;
};

/// Question surface forms. `value` is used by the yes/no and indefinite forms.
std::string question_text(Task task, std::string_view slot, std::string_view value = {});

/// Every instantiated question for the ontology (used to seed vocabularies).
std::vector<std::string> all_question_texts(const Ontology& ontology);

/// English number word for n >= 1 ("one", "two", ...); digits past twenty.
std::string count_word(std::size_t n);

/// Sorted members joined with '+'.
std::string list_label(const SlotState::ValueSet& values);

/// One prefix of a dialog together with the state history up to its end.
struct Subdialog {
  std::string_view dialog_id;
  std::span<const Utterance> prefix;
  std::span<const SlotState> states;  // states[i] after prefix[i]

  std::size_t length() const { return prefix.size(); }
  const SlotState& state() const { return states.back(); }
};

std::vector<Subdialog> expand_subdialogs(const Dialog& dialog);

/// Latest index t' such that the slot's value set is unchanged over t'..t.
std::optional<std::size_t> establishing_index(const Subdialog& sub, std::string_view slot);

QASample gen_factoid(const Subdialog& sub, const std::string& slot);
QASample gen_yesno(const Subdialog& sub, const std::string& slot, const Ontology& ontology,
                   std::mt19937_64& rng);
QASample gen_indefinite(const Subdialog& sub, const std::string& slot, const Ontology& ontology,
                        std::mt19937_64& rng);
QASample gen_count(const Subdialog& sub, const std::string& slot);
QASample gen_list(const Subdialog& sub, const std::string& slot);

// ---------------------------------------------------------------------------
// Augmentation

/// Per-slot surface patterns. Substitution patterns contain <ORIG> (the
/// matched value text) and <VALUE>; addition patterns contain only <VALUE>
/// and form a whole new customer utterance.
class AugmentationTemplates {
 public:
  void add(const std::string& slot, std::string pattern);

  const std::vector<std::string>& substitutions(std::string_view slot) const;
  const std::vector<std::string>& additions(std::string_view slot) const;

  /// Lines of "slot | pattern".
  static AugmentationTemplates parse(std::istream& in);
  static AugmentationTemplates load(const std::string& path);
  static AugmentationTemplates defaults();

 private:
  std::unordered_map<std::string, std::vector<std::string>> substitutions_;
  std::unordered_map<std::string, std::vector<std::string>> additions_;
};

struct AugmentationRules {
  double substitution = 0.0;  // R1, intra-utterance
  double addition = 0.0;      // R2, inter-utterance
};

struct AugmentationRecord {
  enum class Kind { substitution, addition };
  Kind kind = Kind::substitution;
  std::string slot;
  std::string original;        // value whose mention triggered the rule
  std::string added;           // value added to the state
  std::size_t index = 0;       // 1-based utterance index in the augmented dialog
};

struct AugmentedDialog {
  Dialog dialog;
  std::vector<AugmentationRecord> records;
};

AugmentedDialog augment_dialog(const Dialog& dialog, const AugmentationRules& rules,
                               const AugmentationTemplates& templates, const Ontology& ontology,
                               std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Datasets

/// Deterministic per-dialog generator stream derived from the run seed.
std::mt19937_64 stream_rng(std::uint64_t seed, std::size_t dialog_ordinal, std::uint64_t stream);

/// Samples for one task over a corpus, in dialog / prefix / ontology-slot order.
std::vector<QASample> generate_task(const std::vector<Dialog>& dialogs, Task task,
                                    const Ontology& ontology, std::uint64_t seed);

class AnswerVocabulary {
 public:
  std::uint32_t add(const std::string& label);
  std::optional<std::uint32_t> find(std::string_view label) const;
  const std::string& label(std::uint32_t index) const { return labels_.at(index); }
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

  bool operator==(const AnswerVocabulary& o) const { return labels_ == o.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

AnswerVocabulary build_answer_vocabulary(std::span<const QASample> train,
                                         const Ontology& ontology);

struct Split {
  std::vector<QASample> train;
  std::vector<QASample> validation;
};

/// Dialog-level random split; all samples of a dialog land on one side.
Split split_train_validation(std::span<const QASample> samples, double fraction,
                             std::uint64_t seed);

// ---------------------------------------------------------------------------
// Task files

/// Numbered block format: context lines "<n> <text>", then
/// "<n+1> <question> ?\t<answer>\t<supporting fact or empty>".
void write_task_file(std::ostream& out, std::span<const QASample> samples);

/// Provenance sidecar: "dialog_id\tprefix_length\tslot\ttask" per sample.
void write_task_index(std::ostream& out, std::span<const QASample> samples);

/// Reads a task file. Without an index stream the provenance is derived:
/// slot from the question, prefix length from the context, task from the
/// question form, and dialog ids ("#k") from context continuity.
std::vector<QASample> read_task_file(std::istream& in, std::istream* index = nullptr);

std::vector<QASample> load_task_file(const std::string& path);
void save_task_file(const std::string& path, std::span<const QASample> samples);

}  // namespace mrdt
