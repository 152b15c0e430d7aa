// Copyright (c) 2026 The dialog-reader Authors
// SPDX-License-Identifier: Apache-2.0

#include "mrdt/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "mrdt/error.hpp"
#include "text_util.hpp"

namespace mrdt {

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string current;
  for (char ch : text) {
    switch (ch) {
      case '.': case ',': case '?': case '!': case ';': case ':':
        continue;
      default:
        break;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::string join_tokens(const Tokens& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

std::string_view speaker_name(Speaker s) { return s == Speaker::customer ? "cust" : "agent"; }

// ---------------------------------------------------------------------------
// Ontology

void Ontology::add_slot(std::string slot, std::vector<std::string> values) {
  if (has_slot(slot)) throw InvalidArgument(fmt::format("duplicate slot '{}' in ontology", slot));
  std::vector<std::string> unique;
  for (auto& v : values) {
    if (v == kDontCare) continue;
    if (std::find(unique.begin(), unique.end(), v) == unique.end()) unique.push_back(std::move(v));
  }
  slots_.push_back(slot);
  domains_.emplace(std::move(slot), std::move(unique));
}

const std::vector<std::string>& Ontology::values(std::string_view slot) const {
  auto it = domains_.find(slot);
  if (it == domains_.end()) throw InvalidArgument(fmt::format("unknown slot '{}'", slot));
  return it->second;
}

bool Ontology::has_slot(std::string_view slot) const { return domains_.find(slot) != domains_.end(); }

bool Ontology::allows(std::string_view slot, std::string_view value) const {
  if (!has_slot(slot)) return false;
  if (value == kDontCare) return true;
  const auto& dom = values(slot);
  return std::find(dom.begin(), dom.end(), value) != dom.end();
}

Ontology Ontology::parse(std::istream& in) {
  Ontology ont;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto colon = body.find(':');
    if (colon == std::string_view::npos)
      throw ParseError(fmt::format("ontology line {}: expected 'slot: value, value, ...'", line_no));
    std::string slot(detail::trim(body.substr(0, colon)));
    if (slot.empty()) throw ParseError(fmt::format("ontology line {}: empty slot name", line_no));
    std::vector<std::string> values;
    for (auto v : detail::split(body.substr(colon + 1), ',')) {
      auto tv = detail::trim(v);
      if (!tv.empty()) values.emplace_back(tv);
    }
    ont.add_slot(std::move(slot), std::move(values));
  }
  if (ont.slots().empty()) throw ParseError("ontology declares no slots");
  return ont;
}

Ontology Ontology::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open ontology file '{}'", path));
  try {
    return parse(in);
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", path, e.what()));
  }
}

// ---------------------------------------------------------------------------
// SlotState

const SlotState::ValueSet& SlotState::values(std::string_view slot) const {
  static const ValueSet empty;
  auto it = slots_.find(slot);
  return it == slots_.end() ? empty : it->second;
}

void SlotState::add(const std::string& slot, const std::string& value) { slots_[slot].insert(value); }

void SlotState::set(const std::string& slot, ValueSet values) {
  if (values.empty())
    slots_.erase(slot);
  else
    slots_[slot] = std::move(values);
}

std::string format_state(const SlotState& state) {
  std::string out;
  for (const auto& [slot, values] : state.entries()) {
    if (!out.empty()) out.push_back(';');
    out += slot;
    out.push_back('=');
    bool first = true;
    for (const auto& v : values) {
      if (!first) out.push_back(',');
      out += v;
      first = false;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dialog records

namespace {

Speaker parse_speaker(std::string_view s, std::size_t line_no) {
  std::string lower;
  for (char c : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "cust" || lower == "customer" || lower == "user") return Speaker::customer;
  if (lower == "agent" || lower == "system" || lower == "sys") return Speaker::agent;
  throw ParseError(fmt::format("line {}: field 'speaker' has unknown value '{}'", line_no, s));
}

SlotState parse_state(std::string_view field, const Ontology& ontology, std::size_t line_no) {
  SlotState state;
  for (auto part : detail::split(field, ';')) {
    auto entry = detail::trim(part);
    if (entry.empty()) continue;
    auto eq = entry.find('=');
    if (eq == std::string_view::npos)
      throw ParseError(fmt::format("line {}: field 'state' entry '{}' lacks '='", line_no, entry));
    std::string slot(detail::trim(entry.substr(0, eq)));
    if (!ontology.has_slot(slot))
      throw ParseError(fmt::format("line {}: field 'state' names unknown slot '{}'", line_no, slot));
    for (auto v : detail::split(entry.substr(eq + 1), ',')) {
      std::string value(detail::trim(v));
      if (value.empty()) continue;
      if (!ontology.allows(slot, value))
        throw ParseError(fmt::format("line {}: value '{}' is not in the domain of slot '{}'",
                                     line_no, value, slot));
      state.add(slot, value);
    }
  }
  return state;
}

void validate_dialog(const Dialog& d, std::size_t line_no) {
  if (d.utterances.empty())
    throw ParseError(fmt::format("line {}: dialog '{}' has no turns", line_no, d.id));
  if (d.states.size() != d.utterances.size())
    throw ParseError(fmt::format("line {}: dialog '{}': state/turn count mismatch", line_no, d.id));
  SlotState prev;
  for (std::size_t t = 0; t < d.states.size(); ++t) {
    for (const auto& [slot, values] : prev.entries()) {
      if (!d.states[t].informed(slot))
        throw ParseError(fmt::format("line {}: dialog '{}': slot '{}' becomes uninformed at turn {}",
                                     line_no, d.id, slot, t + 1));
    }
    prev = d.states[t];
  }
}

}  // namespace

std::vector<Dialog> parse_dialog_corpus(std::istream& in, const Ontology& ontology) {
  std::vector<Dialog> dialogs;
  std::optional<Dialog> current;
  std::size_t record_line = 0;
  std::string line;
  std::size_t line_no = 0;

  auto finish = [&] {
    if (!current) return;
    validate_dialog(*current, record_line);
    dialogs.push_back(std::move(*current));
    current.reset();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto body = detail::trim(line);
    if (body.empty()) {
      finish();
      continue;
    }
    if (body.starts_with("#")) {
      auto rest = detail::trim(body.substr(1));
      const bool header = rest == "dialog" || rest.starts_with("dialog ") || rest.starts_with("dialog\t");
      if (!header) continue;  // comment
      finish();
      auto id = detail::trim(rest.substr(6));
      if (id.empty()) throw ParseError(fmt::format("line {}: field 'id' is empty", line_no));
      current.emplace();
      current->id = std::string(id);
      record_line = line_no;
      continue;
    }
    if (!current)
      throw ParseError(fmt::format("line {}: turn line outside a '# dialog' record", line_no));

    auto first = line.find('|');
    auto second = first == std::string::npos ? first : line.find('|', first + 1);
    auto last = line.rfind('|');
    if (second != std::string::npos && last == second)
      throw ParseError(fmt::format("line {}: dialog '{}': state/turn count mismatch (turn has no state field)",
                                   line_no, current->id));
    if (first == std::string::npos || second == std::string::npos || last <= second)
      throw ParseError(fmt::format("line {}: expected 4 '|'-separated fields", line_no));

    std::string_view view(line);
    auto index_field = detail::trim(view.substr(0, first));
    auto speaker_field = detail::trim(view.substr(first + 1, second - first - 1));
    auto text_field = view.substr(second + 1, last - second - 1);
    auto state_field = view.substr(last + 1);

    auto index = detail::parse_size(index_field);
    if (!index || *index == 0)
      throw ParseError(fmt::format("line {}: field 'index' is not a positive integer", line_no));
    if (*index != current->utterances.size() + 1)
      throw ParseError(fmt::format("line {}: field 'index' is {} but turn {} was expected", line_no,
                                   *index, current->utterances.size() + 1));

    Utterance u;
    u.index = *index;
    u.speaker = parse_speaker(speaker_field, line_no);
    u.text = std::string(detail::trim(text_field));
    u.tokens = tokenize(u.text);
    current->utterances.push_back(std::move(u));
    current->states.push_back(parse_state(state_field, ontology, line_no));
  }
  finish();
  return dialogs;
}

std::vector<Dialog> load_dialog_corpus(const std::string& path, const Ontology& ontology) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open corpus file '{}'", path));
  try {
    return parse_dialog_corpus(in, ontology);
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", path, e.what()));
  }
}

void write_dialog_corpus(std::ostream& out, const std::vector<Dialog>& dialogs) {
  bool first = true;
  for (const auto& d : dialogs) {
    if (!first) out << '\n';
    first = false;
    out << "# dialog " << d.id << '\n';
    for (std::size_t t = 0; t < d.utterances.size(); ++t) {
      const auto& u = d.utterances[t];
      out << u.index << '|' << speaker_name(u.speaker) << '|' << u.text << '|'
          << format_state(d.states[t]) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  tokens_ = {"<null>", "<unk>"};
}

std::uint32_t Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  auto idx = static_cast<std::uint32_t>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, idx);
  return idx;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t Vocabulary::lookup(std::string_view token) const { return find(token).value_or(kUnk); }

Vocabulary build_vocabulary(const std::vector<Dialog>& dialogs,
                            const std::vector<std::string>& questions) {
  if (dialogs.empty()) throw InvalidArgument("build_vocabulary needs at least one dialog");
  Vocabulary vocab;
  for (const auto& d : dialogs)
    for (const auto& u : d.utterances)
      for (const auto& t : u.tokens) vocab.add(t);
  for (const auto& q : questions)
    for (const auto& t : tokenize(q)) vocab.add(t);
  return vocab;
}

std::uint32_t BagOfWords::count(std::uint32_t index) const {
  auto it = std::lower_bound(counts.begin(), counts.end(), index,
                             [](const auto& e, std::uint32_t i) { return e.first < i; });
  return it != counts.end() && it->first == index ? it->second : 0;
}

std::size_t BagOfWords::total() const {
  std::size_t n = 0;
  for (const auto& [idx, c] : counts) n += c;
  return n;
}

BagOfWords encode_bow(const Tokens& tokens, const Vocabulary& vocab) {
  BagOfWords bag;
  bag.dimension = vocab.size();
  std::map<std::uint32_t, std::uint32_t> counts;
  for (const auto& t : tokens) ++counts[vocab.lookup(t)];
  bag.counts.assign(counts.begin(), counts.end());
  return bag;
}

// ---------------------------------------------------------------------------
// Pretrained embeddings

Matrix load_pretrained_embeddings(std::istream& in, const Vocabulary& vocab, std::size_t dim,
                                  std::mt19937_64& rng) {
  std::unordered_map<std::string, std::vector<double>> vectors;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    double v;
    while (fields >> v) values.push_back(v);
    // word2vec text files may start with a "<count> <dim>" header.
    if (line_no == 1 && values.size() == 1 && detail::parse_size(token)) continue;
    if (values.size() != dim)
      throw InvalidArgument(fmt::format(
          "embedding file dimension {} (line {}) does not match requested dimension {}",
          values.size(), line_no, dim));
    vectors.emplace(std::move(token), std::move(values));
  }

  Matrix out(dim, vocab.size());
  std::normal_distribution<double> gauss(0.0, 0.1);
  for (std::uint32_t j = 0; j < vocab.size(); ++j) {
    auto it = j >= 2 ? vectors.find(vocab.token(j)) : vectors.end();
    for (std::size_t r = 0; r < dim; ++r)
      out(r, j) = it != vectors.end() ? it->second[r] : gauss(rng);
  }
  for (std::size_t r = 0; r < dim; ++r) out(r, Vocabulary::kNull) = 0.0;
  return out;
}

Matrix load_pretrained_embeddings(const std::string& path, const Vocabulary& vocab,
                                  std::size_t dim, std::mt19937_64& rng) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open embedding file '{}'", path));
  return load_pretrained_embeddings(in, vocab, dim, rng);
}

}  // namespace mrdt
