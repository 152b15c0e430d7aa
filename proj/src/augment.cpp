// Copyright (c) 2026 The dialog-reader Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "mrdt/error.hpp"
#include "mrdt/taskgen.hpp"
#include "resources.hpp"
#include "text_util.hpp"

namespace mrdt {

namespace {

constexpr std::string_view kOrigHole = "<ORIG>";
constexpr std::string_view kValueHole = "<VALUE>";

std::string replace_all(std::string s, std::string_view hole, std::string_view with) {
  for (auto pos = s.find(hole); pos != std::string::npos; pos = s.find(hole, pos + with.size()))
    s.replace(pos, hole.size(), with);
  return s;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '\''; }

/// Case-insensitive whole-word search.
std::optional<std::size_t> find_mention(std::string_view text, std::string_view value) {
  if (value.empty() || value.size() > text.size()) return std::nullopt;
  for (std::size_t pos = 0; pos + value.size() <= text.size(); ++pos) {
    bool match = true;
    for (std::size_t i = 0; i < value.size() && match; ++i)
      match = std::tolower(static_cast<unsigned char>(text[pos + i])) ==
              std::tolower(static_cast<unsigned char>(value[i]));
    if (!match) continue;
    bool left_ok = pos == 0 || !is_word_char(text[pos - 1]);
    auto end = pos + value.size();
    bool right_ok = end == text.size() || !is_word_char(text[end]);
    if (left_ok && right_ok) return pos;
  }
  return std::nullopt;
}

const std::vector<std::string>& empty_patterns() {
  static const std::vector<std::string> empty;
  return empty;
}

}  // namespace

void AugmentationTemplates::add(const std::string& slot, std::string pattern) {
  if (pattern.find(kValueHole) == std::string::npos)
    throw InvalidArgument(fmt::format("augmentation pattern '{}' lacks a <VALUE> hole", pattern));
  if (pattern.find(kOrigHole) != std::string::npos)
    substitutions_[slot].push_back(std::move(pattern));
  else
    additions_[slot].push_back(std::move(pattern));
}

const std::vector<std::string>& AugmentationTemplates::substitutions(std::string_view slot) const {
  auto it = substitutions_.find(std::string(slot));
  return it == substitutions_.end() ? empty_patterns() : it->second;
}

const std::vector<std::string>& AugmentationTemplates::additions(std::string_view slot) const {
  auto it = additions_.find(std::string(slot));
  return it == additions_.end() ? empty_patterns() : it->second;
}

AugmentationTemplates AugmentationTemplates::parse(std::istream& in) {
  AugmentationTemplates t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto bar = body.find('|');
    if (bar == std::string_view::npos)
      throw ParseError(fmt::format("template line {}: expected 'slot | pattern'", line_no));
    auto slot = detail::trim(body.substr(0, bar));
    auto pattern = detail::trim(body.substr(bar + 1));
    if (slot.empty() || pattern.empty())
      throw ParseError(fmt::format("template line {}: empty slot or pattern", line_no));
    try {
      t.add(std::string(slot), std::string(pattern));
    } catch (const InvalidArgument& e) {
      throw ParseError(fmt::format("template line {}: {}", line_no, e.what()));
    }
  }
  return t;
}

AugmentationTemplates AugmentationTemplates::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open template file '{}'", path));
  return parse(in);
}

AugmentationTemplates AugmentationTemplates::defaults() {
  std::istringstream in{std::string(detail::default_templates_text())};
  return parse(in);
}

AugmentedDialog augment_dialog(const Dialog& dialog, const AugmentationRules& rules,
                               const AugmentationTemplates& templates, const Ontology& ontology,
                               std::mt19937_64& rng) {
  const std::size_t n = dialog.size();
  std::vector<Utterance> utts = dialog.utterances;
  std::vector<SlotState> states = dialog.states;

  // Values already used per slot, so added values never collide.
  std::map<std::string, std::set<std::string>> used;
  for (const auto& st : dialog.states)
    for (const auto& [slot, values] : st.entries()) used[slot].insert(values.begin(), values.end());

  auto sample_new_value = [&](const std::string& slot) -> std::optional<std::string> {
    std::vector<std::string> pool;
    for (const auto& v : ontology.values(slot))
      if (!used[slot].contains(v)) pool.push_back(v);
    if (pool.empty()) return std::nullopt;
    std::uniform_int_distribution<std::size_t> dist(0, pool.size() - 1);
    auto v = pool[dist(rng)];
    used[slot].insert(v);
    return v;
  };
  auto pick_pattern = [&](const std::vector<std::string>& patterns) -> const std::string& {
    std::uniform_int_distribution<std::size_t> dist(0, patterns.size() - 1);
    return patterns[dist(rng)];
  };

  struct Informed {
    std::size_t turn;  // 0-based original index
    std::string slot;
    std::string value;
  };
  std::vector<Informed> informs;
  for (std::size_t t = 0; t < n; ++t) {
    for (const auto& slot : ontology.slots()) {
      const auto& now = dialog.states[t].values(slot);
      for (const auto& v : now) {
        if (v == kDontCare) continue;
        if (t > 0 && dialog.states[t - 1].values(slot).contains(v)) continue;
        informs.push_back({t, slot, v});
      }
    }
  }

  std::bernoulli_distribution r1(std::clamp(rules.substitution, 0.0, 1.0));
  std::bernoulli_distribution r2(std::clamp(rules.addition, 0.0, 1.0));

  struct PendingRecord {
    AugmentationRecord record;
    std::size_t orig_turn;  // record index refers to this original turn
    bool inserted;
  };
  std::vector<PendingRecord> pending;

  // R1: rewrite "v" as "v or w" in the informing utterance.
  if (rules.substitution > 0.0) {
    for (const auto& inf : informs) {
      auto& utt = utts[inf.turn];
      auto pos = find_mention(utt.text, inf.value);
      if (!pos) continue;
      if (!r1(rng)) continue;
      auto added = sample_new_value(inf.slot);
      if (!added) continue;
      const auto& subs = templates.substitutions(inf.slot);
      std::string pattern = subs.empty() ? std::string("<ORIG> or <VALUE>") : pick_pattern(subs);
      std::string orig = utt.text.substr(*pos, inf.value.size());
      std::string repl = replace_all(replace_all(pattern, kOrigHole, orig), kValueHole, *added);
      utt.text.replace(*pos, inf.value.size(), repl);
      utt.tokens = tokenize(utt.text);
      for (std::size_t t = inf.turn; t < n; ++t) states[t].add(inf.slot, *added);
      pending.push_back({{AugmentationRecord::Kind::substitution, inf.slot, inf.value, *added, 0},
                         inf.turn, false});
    }
  }

  // R2: later customer remark adding a further acceptable value. Insertions
  // are keyed by the original turn they precede.
  struct Insertion {
    std::size_t before;  // 0-based original index, in (inform turn, n-1]
    std::string slot;
    std::string value;
    std::string text;
    std::size_t record;
  };
  std::vector<Insertion> insertions;
  if (rules.addition > 0.0) {
    for (const auto& inf : informs) {
      if (inf.turn + 1 >= n) continue;
      const auto& adds = templates.additions(inf.slot);
      if (adds.empty()) continue;
      if (!r2(rng)) continue;
      auto added = sample_new_value(inf.slot);
      if (!added) continue;
      std::uniform_int_distribution<std::size_t> where(inf.turn + 1, n - 1);
      std::size_t before = where(rng);
      std::string text = replace_all(pick_pattern(adds), kValueHole, *added);
      insertions.push_back({before, inf.slot, *added, std::move(text), pending.size()});
      pending.push_back({{AugmentationRecord::Kind::addition, inf.slot, inf.value, *added, 0},
                         before, true});
    }
    std::stable_sort(insertions.begin(), insertions.end(),
                     [](const Insertion& a, const Insertion& b) { return a.before < b.before; });
  }

  AugmentedDialog out;
  out.dialog.id = dialog.id;
  SlotState extras;
  std::vector<std::size_t> new_index(n);
  std::vector<std::size_t> insertion_index(pending.size(), 0);
  auto ins = insertions.begin();
  for (std::size_t t = 0; t < n; ++t) {
    for (; ins != insertions.end() && ins->before == t; ++ins) {
      extras.add(ins->slot, ins->value);
      Utterance u;
      u.speaker = Speaker::customer;
      u.text = ins->text;
      u.tokens = tokenize(u.text);
      u.index = out.dialog.utterances.size() + 1;
      SlotState st = out.dialog.states.empty() ? SlotState{} : out.dialog.states.back();
      st.add(ins->slot, ins->value);
      out.dialog.utterances.push_back(std::move(u));
      out.dialog.states.push_back(std::move(st));
      insertion_index[ins->record] = out.dialog.utterances.size();
    }
    Utterance u = utts[t];
    u.index = out.dialog.utterances.size() + 1;
    SlotState st = states[t];
    for (const auto& [slot, values] : extras.entries())
      for (const auto& v : values) st.add(slot, v);
    out.dialog.utterances.push_back(std::move(u));
    out.dialog.states.push_back(std::move(st));
    new_index[t] = out.dialog.utterances.size();
  }

  for (std::size_t i = 0; i < pending.size(); ++i) {
    auto rec = pending[i].record;
    rec.index = pending[i].inserted ? insertion_index[i] : new_index[pending[i].orig_turn];
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace mrdt
