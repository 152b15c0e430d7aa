// Copyright (c) 2026 The dialog-reader Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dialog corpus ingestion: tokenization, the dialog-record format, slot
// ontologies, vocabularies and bag-of-words encoding.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mrdt/matrix.hpp"

namespace mrdt {

inline constexpr std::string_view kDontCare = "dontcare";

using Tokens = std::vector<std::string>;

/// Lowercases, strips . , ? ! ; : and splits on whitespace.
Tokens tokenize(std::string_view text);

std::string join_tokens(const Tokens& tokens);

enum class Speaker { customer, agent };

std::string_view speaker_name(Speaker s);

struct Utterance {
  std::size_t index = 0;  // 1-based
  Speaker speaker = Speaker::customer;
  std::string text;
  Tokens tokens;

  bool operator==(const Utterance&) const = default;
};

/// Slot domains, in declaration order. "dontcare" is implicitly allowed for
/// every slot and is never listed as a domain value.
class Ontology {
 public:
  Ontology() = default;

  void add_slot(std::string slot, std::vector<std::string> values);

  const std::vector<std::string>& slots() const { return slots_; }
  const std::vector<std::string>& values(std::string_view slot) const;
  bool has_slot(std::string_view slot) const;
  bool allows(std::string_view slot, std::string_view value) const;

  static Ontology parse(std::istream& in);
  static Ontology load(const std::string& path);

 private:
  std::vector<std::string> slots_;
  std::map<std::string, std::vector<std::string>, std::less<>> domains_;
};

/// Per-slot value sets. Slots with empty sets are not stored, so equality is
/// structural.
class SlotState {
 public:
  using ValueSet = std::set<std::string>;

  const ValueSet& values(std::string_view slot) const;
  bool informed(std::string_view slot) const { return !values(slot).empty(); }
  void add(const std::string& slot, const std::string& value);
  void set(const std::string& slot, ValueSet values);

  const std::map<std::string, ValueSet, std::less<>>& entries() const { return slots_; }

  bool operator==(const SlotState&) const = default;

 private:
  std::map<std::string, ValueSet, std::less<>> slots_;
};

struct Dialog {
  std::string id;
  std::vector<Utterance> utterances;
  std::vector<SlotState> states;  // states[t] holds after utterances[t]

  std::size_t size() const { return utterances.size(); }
  bool operator==(const Dialog&) const = default;
};

/// Reads blank-line separated "# dialog <id>" records. Each turn line is
/// "<index>|<speaker>|<text>|<slot=value[,value...];...>".
std::vector<Dialog> parse_dialog_corpus(std::istream& in, const Ontology& ontology);
std::vector<Dialog> load_dialog_corpus(const std::string& path, const Ontology& ontology);

void write_dialog_corpus(std::ostream& out, const std::vector<Dialog>& dialogs);

std::string format_state(const SlotState& state);

class Vocabulary {
 public:
  static constexpr std::uint32_t kNull = 0;
  static constexpr std::uint32_t kUnk = 1;

  Vocabulary();

  std::uint32_t add(const std::string& token);
  std::optional<std::uint32_t> find(std::string_view token) const;
  /// Index of the token, or kUnk.
  std::uint32_t lookup(std::string_view token) const;
  const std::string& token(std::uint32_t index) const { return tokens_.at(index); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// First-seen order over utterance tokens, then question tokens.
Vocabulary build_vocabulary(const std::vector<Dialog>& dialogs,
                            const std::vector<std::string>& questions);

/// Sparse bag of words: (token index, count) pairs sorted by index.
struct BagOfWords {
  std::size_t dimension = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> counts;

  std::uint32_t count(std::uint32_t index) const;
  std::size_t total() const;
  bool operator==(const BagOfWords&) const = default;
};

BagOfWords encode_bow(const Tokens& tokens, const Vocabulary& vocab);

/// Returns a dim x |V| matrix. Tokens missing from the file get N(0, 0.1^2)
/// draws; the NULL column is zero.
Matrix load_pretrained_embeddings(std::istream& in, const Vocabulary& vocab, std::size_t dim,
                                  std::mt19937_64& rng);
Matrix load_pretrained_embeddings(const std::string& path, const Vocabulary& vocab,
                                  std::size_t dim, std::mt19937_64& rng);

}  // namespace mrdt
