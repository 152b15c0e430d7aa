// Copyright (c) 2026 The dialog-reader Authors
// SPDX-License-Identifier: Apache-2.0

#include "mrdt/taskgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "mrdt/error.hpp"
#include "text_util.hpp"

namespace mrdt {

std::string_view task_name(Task task) {
  switch (task) {
    case Task::factoid: return "factoid";
    case Task::yesno: return "yesno";
    case Task::indefinite: return "indefinite";
    case Task::count: return "count";
    case Task::list: return "list";
  }
  return "?";
}

std::optional<Task> parse_task(std::string_view name) {
  for (Task t : kAllTasks)
    if (task_name(t) == name) return t;
  return std::nullopt;
}

std::string question_text(Task task, std::string_view slot, std::string_view value) {
  switch (task) {
    case Task::factoid: return fmt::format("what is the {} ?", slot);
    case Task::yesno:
    case Task::indefinite: return fmt::format("is the {} {} ?", slot, value);
    case Task::count: return fmt::format("how many {} are requested ?", slot);
    case Task::list: return fmt::format("what are the {} requested ?", slot);
  }
  return {};
}

std::vector<std::string> all_question_texts(const Ontology& ontology) {
  std::vector<std::string> out;
  for (const auto& slot : ontology.slots()) {
    out.push_back(question_text(Task::factoid, slot));
    out.push_back(question_text(Task::count, slot));
    out.push_back(question_text(Task::list, slot));
    out.push_back(question_text(Task::yesno, slot, kDontCare));
    for (const auto& v : ontology.values(slot)) out.push_back(question_text(Task::yesno, slot, v));
  }
  return out;
}

std::string count_word(std::size_t n) {
  static constexpr std::string_view words[] = {
      "zero",    "one",     "two",       "three",    "four",     "five",    "six",
      "seven",   "eight",   "nine",      "ten",      "eleven",   "twelve",  "thirteen",
      "fourteen", "fifteen", "sixteen",  "seventeen", "eighteen", "nineteen", "twenty"};
  if (n < std::size(words)) return std::string(words[n]);
  return std::to_string(n);
}

std::string list_label(const SlotState::ValueSet& values) {
  std::string out;
  for (const auto& v : values) {  // std::set iterates in ascending order
    if (!out.empty()) out.push_back('+');
    out += v;
  }
  return out;
}

std::vector<Subdialog> expand_subdialogs(const Dialog& dialog) {
  std::vector<Subdialog> out;
  out.reserve(dialog.size());
  std::span<const Utterance> utts(dialog.utterances);
  std::span<const SlotState> states(dialog.states);
  for (std::size_t t = 1; t <= dialog.size(); ++t)
    out.push_back(Subdialog{dialog.id, utts.first(t), states.first(t)});
  return out;
}

std::optional<std::size_t> establishing_index(const Subdialog& sub, std::string_view slot) {
  const auto& current = sub.state().values(slot);
  if (current.empty()) return std::nullopt;
  std::size_t t = sub.length();
  while (t > 1 && sub.states[t - 2].values(slot) == current) --t;
  return t;
}

namespace {

QASample base_sample(const Subdialog& sub, Task task, const std::string& slot) {
  QASample s;
  s.context.reserve(sub.length());
  for (const auto& u : sub.prefix) s.context.push_back(u.tokens);
  s.task = task;
  s.slot = slot;
  s.dialog_id = std::string(sub.dialog_id);
  s.prefix_length = sub.length();
  return s;
}

template <class Range>
const std::string& pick(const Range& range, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, std::size(range) - 1);
  auto it = std::begin(range);
  std::advance(it, dist(rng));
  return *it;
}

}  // namespace

QASample gen_factoid(const Subdialog& sub, const std::string& slot) {
  QASample s = base_sample(sub, Task::factoid, slot);
  s.question = tokenize(question_text(Task::factoid, slot));
  const auto& values = sub.state().values(slot);
  if (values.empty()) {
    s.answer = std::string(kNoneLabel);
  } else {
    s.answer = values.size() == 1 ? *values.begin() : list_label(values);
    s.supporting_fact = establishing_index(sub, slot);
  }
  return s;
}

QASample gen_yesno(const Subdialog& sub, const std::string& slot, const Ontology& ontology,
                   std::mt19937_64& rng) {
  const auto& gold = sub.state().values(slot);
  if (gold.empty())
    throw InvalidArgument(fmt::format("gen_yesno: slot '{}' is not informed", slot));
  QASample s = base_sample(sub, Task::yesno, slot);

  std::vector<std::string> negatives;
  for (const auto& v : ontology.values(slot))
    if (!gold.contains(v)) negatives.push_back(v);

  std::bernoulli_distribution coin(0.5);
  bool positive = coin(rng) || negatives.empty();
  std::string queried = positive ? pick(gold, rng) : pick(negatives, rng);
  s.answer = std::string(positive ? kYes : kNo);
  s.question = tokenize(question_text(Task::yesno, slot, queried));
  s.supporting_fact = establishing_index(sub, slot);
  return s;
}

QASample gen_indefinite(const Subdialog& sub, const std::string& slot, const Ontology& ontology,
                        std::mt19937_64& rng) {
  if (sub.state().informed(slot))
    throw InvalidArgument(fmt::format("gen_indefinite: slot '{}' is informed", slot));
  QASample s = base_sample(sub, Task::indefinite, slot);
  const auto& domain = ontology.values(slot);
  if (domain.empty()) throw InvalidArgument(fmt::format("slot '{}' has an empty domain", slot));
  s.question = tokenize(question_text(Task::indefinite, slot, pick(domain, rng)));
  s.answer = std::string(kMaybe);
  return s;
}

QASample gen_count(const Subdialog& sub, const std::string& slot) {
  const auto& values = sub.state().values(slot);
  if (values.empty()) throw InvalidArgument(fmt::format("gen_count: slot '{}' is not informed", slot));
  QASample s = base_sample(sub, Task::count, slot);
  s.question = tokenize(question_text(Task::count, slot));
  s.answer = count_word(values.size());
  s.supporting_fact = establishing_index(sub, slot);
  return s;
}

QASample gen_list(const Subdialog& sub, const std::string& slot) {
  const auto& values = sub.state().values(slot);
  if (values.empty()) throw InvalidArgument(fmt::format("gen_list: slot '{}' is not informed", slot));
  QASample s = base_sample(sub, Task::list, slot);
  s.question = tokenize(question_text(Task::list, slot));
  s.answer = list_label(values);
  s.supporting_fact = establishing_index(sub, slot);
  return s;
}

// ---------------------------------------------------------------------------
// Datasets

std::mt19937_64 stream_rng(std::uint64_t seed, std::size_t dialog_ordinal, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(dialog_ordinal),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(dialog_ordinal) >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

namespace {
constexpr std::uint64_t kYesNoStream = 1;
constexpr std::uint64_t kMaybeStream = 2;
}  // namespace

std::vector<QASample> generate_task(const std::vector<Dialog>& dialogs, Task task,
                                    const Ontology& ontology, std::uint64_t seed) {
  std::vector<QASample> out;
  for (std::size_t d = 0; d < dialogs.size(); ++d) {
    auto yes_rng = stream_rng(seed, d, kYesNoStream);
    auto maybe_rng = stream_rng(seed, d, kMaybeStream);
    for (const auto& sub : expand_subdialogs(dialogs[d])) {
      for (const auto& slot : ontology.slots()) {
        bool informed = sub.state().informed(slot);
        switch (task) {
          case Task::factoid:
            out.push_back(gen_factoid(sub, slot));
            break;
          case Task::yesno:
            if (informed) out.push_back(gen_yesno(sub, slot, ontology, yes_rng));
            break;
          case Task::indefinite:
            // Same yes/no stream as Task::yesno, so the yes/no part is identical.
            if (informed) {
              auto s = gen_yesno(sub, slot, ontology, yes_rng);
              s.task = Task::indefinite;
              out.push_back(std::move(s));
            } else {
              out.push_back(gen_indefinite(sub, slot, ontology, maybe_rng));
            }
            break;
          case Task::count:
            if (informed) out.push_back(gen_count(sub, slot));
            break;
          case Task::list:
            if (informed) out.push_back(gen_list(sub, slot));
            break;
        }
      }
    }
  }
  return out;
}

std::uint32_t AnswerVocabulary::add(const std::string& label) {
  auto it = index_.find(label);
  if (it != index_.end()) return it->second;
  auto idx = static_cast<std::uint32_t>(labels_.size());
  labels_.push_back(label);
  index_.emplace(label, idx);
  return idx;
}

std::optional<std::uint32_t> AnswerVocabulary::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

AnswerVocabulary build_answer_vocabulary(std::span<const QASample> train,
                                         const Ontology& ontology) {
  AnswerVocabulary vocab;
  for (const auto& slot : ontology.slots())
    for (const auto& v : ontology.values(slot)) vocab.add(v);
  for (auto w : {kDontCare, kNoneLabel, kYes, kNo, kMaybe}) vocab.add(std::string(w));
  for (const auto& s : train) vocab.add(s.answer);
  return vocab;
}

Split split_train_validation(std::span<const QASample> samples, double fraction,
                             std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw InvalidArgument(fmt::format("validation fraction {} is outside (0, 1)", fraction));
  std::vector<std::string> ids;
  std::set<std::string, std::less<>> seen;
  for (const auto& s : samples)
    if (seen.insert(s.dialog_id).second) ids.push_back(s.dialog_id);
  if (ids.size() < 2)
    throw InvalidArgument(fmt::format("cannot split {} dialog(s) into train and validation", ids.size()));

  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ids.size())));
  std::set<std::string, std::less<>> val_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));

  Split split;
  for (const auto& s : samples) (val_ids.contains(s.dialog_id) ? split.validation : split.train).push_back(s);
  return split;
}

// ---------------------------------------------------------------------------
// Task files

void write_task_file(std::ostream& out, std::span<const QASample> samples) {
  for (const auto& s : samples) {
    std::size_t n = 1;
    for (const auto& utt : s.context) {
      out << n++;
      if (!utt.empty()) out << ' ' << join_tokens(utt);
      out << '\n';
    }
    out << n << ' ' << join_tokens(s.question) << " ?\t" << s.answer << '\t';
    if (s.supporting_fact) out << *s.supporting_fact;
    out << '\n';
  }
}

void write_task_index(std::ostream& out, std::span<const QASample> samples) {
  for (const auto& s : samples)
    out << s.dialog_id << '\t' << s.prefix_length << '\t' << s.slot << '\t' << task_name(s.task)
        << '\n';
}

namespace {

void derive_provenance(QASample& s) {
  const auto& q = s.question;
  s.prefix_length = s.context.size();
  auto starts = [&](std::initializer_list<std::string_view> head) {
    if (q.size() < head.size()) return false;
    std::size_t i = 0;
    for (auto h : head)
      if (q[i++] != h) return false;
    return true;
  };
  if (starts({"what", "is", "the"}) && q.size() >= 4) {
    s.task = Task::factoid;
    s.slot = q[3];
  } else if (starts({"what", "are", "the"}) && q.size() >= 4) {
    s.task = Task::list;
    s.slot = q[3];
  } else if (starts({"how", "many"}) && q.size() >= 3) {
    s.task = Task::count;
    s.slot = q[2];
  } else if (starts({"is", "the"}) && q.size() >= 3) {
    s.task = s.answer == kMaybe ? Task::indefinite : Task::yesno;
    s.slot = q[2];
  }
}

}  // namespace

std::vector<QASample> read_task_file(std::istream& in, std::istream* index) {
  std::vector<QASample> samples;
  std::vector<Tokens> context;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto space = line.find(' ');
    std::string_view number_part = std::string_view(line).substr(0, space);
    auto tab = number_part.find('\t');
    if (tab != std::string_view::npos) number_part = number_part.substr(0, tab);
    auto n = detail::parse_size(number_part);
    if (!n || *n == 0)
      throw ParseError(fmt::format("task file line {}: missing line number", line_no));
    if (*n == 1 && !context.empty()) {
      throw ParseError(fmt::format("task file line {}: new block before the question line", line_no));
    }
    if (*n != context.size() + 1)
      throw ParseError(fmt::format("task file line {}: expected number {}, found {}", line_no,
                                   context.size() + 1, *n));
    std::string_view rest = space == std::string::npos ? std::string_view{}
                                                       : std::string_view(line).substr(space + 1);
    if (rest.find('\t') == std::string_view::npos) {
      context.push_back(tokenize(rest));
      continue;
    }
    auto fields = detail::split(rest, '\t');
    if (fields.size() != 3)
      throw ParseError(fmt::format("task file line {}: question line needs 3 tab-separated fields",
                                   line_no));
    QASample s;
    s.context = std::move(context);
    context.clear();
    s.question = tokenize(fields[0]);
    s.answer = std::string(fields[1]);
    if (s.answer.empty())
      throw ParseError(fmt::format("task file line {}: empty answer", line_no));
    if (!fields[2].empty()) {
      auto sf = detail::parse_size(fields[2]);
      if (!sf || *sf == 0 || *sf > s.context.size())
        throw ParseError(fmt::format("task file line {}: bad supporting fact '{}'", line_no, fields[2]));
      s.supporting_fact = *sf;
    }
    derive_provenance(s);
    samples.push_back(std::move(s));
  }
  if (!context.empty())
    throw ParseError(fmt::format("task file line {}: block ends without a question line", line_no));

  if (index) {
    std::size_t i = 0;
    std::size_t idx_line = 0;
    while (std::getline(*index, line)) {
      ++idx_line;
      if (line.empty()) continue;
      auto f = detail::split(line, '\t');
      auto plen = f.size() == 4 ? detail::parse_size(f[1]) : std::nullopt;
      auto task = f.size() == 4 ? parse_task(f[3]) : std::nullopt;
      if (!plen || !task)
        throw ParseError(fmt::format("task index line {}: expected 'id\\tprefix\\tslot\\ttask'", idx_line));
      if (i >= samples.size())
        throw ParseError(fmt::format("task index line {}: more entries than samples", idx_line));
      auto& s = samples[i++];
      s.dialog_id = std::string(f[0]);
      s.prefix_length = *plen;
      s.slot = std::string(f[2]);
      s.task = *task;
    }
    if (i != samples.size())
      throw ParseError(fmt::format("task index has {} entries for {} samples", i, samples.size()));
  } else {
    // A new dialog starts whenever the context stops extending the previous one.
    std::size_t ordinal = 0;
    const std::vector<Tokens>* prev = nullptr;
    for (auto& s : samples) {
      bool continues = prev && s.context.size() >= prev->size() &&
                       std::equal(prev->begin(), prev->end(), s.context.begin());
      if (!continues) ++ordinal;
      s.dialog_id = fmt::format("#{}", ordinal);
      prev = &s.context;
    }
  }
  return samples;
}

std::vector<QASample> load_task_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open task file '{}'", path));
  std::ifstream index(path + ".index");
  try {
    return read_task_file(in, index ? &index : nullptr);
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", path, e.what()));
  }
}

void save_task_file(const std::string& path, std::span<const QASample> samples) {
  std::ofstream out(path, std::ios::binary);
  std::ofstream index(path + ".index", std::ios::binary);
  if (!out || !index) throw IoError(fmt::format("cannot write task file '{}'", path));
  write_task_file(out, samples);
  write_task_index(index, samples);
  if (!out || !index) throw IoError(fmt::format("write failed for '{}'", path));
}

}  // namespace mrdt
