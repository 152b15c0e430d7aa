// Copyright (c) 2026 The dialog-reader Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "mrdt/error.hpp"
#include "mrdt/pipeline.hpp"
#include "mrdt/taskgen.hpp"
#include "synthetic.hpp"

using namespace mrdt;

namespace {

std::vector<Dialog> appendix() {
  return load_dialog_corpus(MRDT_SOURCE_DIR "/data/examples/appendix.dlg", default_ontology());
}

const Dialog& by_id(const std::vector<Dialog>& ds, std::string_view id) {
  for (const auto& d : ds)
    if (d.id == id) return d;
  throw std::runtime_error("no dialog " + std::string(id));
}

synth::Domain domain_of(const Ontology& ont) {
  synth::Domain dom;
  dom.slots = ont.slots();
  for (const auto& s : dom.slots) dom.values[s] = ont.values(s);
  return dom;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Checks every sample against the oracle built from `record_text`.
void check_against_oracle(const std::string& record_text, const std::vector<QASample>& samples) {
  auto oracle = synth::parse(record_text);
  std::map<std::string, const synth::Dialog*> index;
  for (const auto& d : oracle) index[d.id] = &d;
  std::size_t agree = 0;
  for (const auto& s : samples) {
    const auto& d = *index.at(s.dialog_id);
    auto exp = synth::expected(d, s.prefix_length, s.slot, std::string(task_name(s.task)),
                               join_tokens(s.question));
    bool ok = exp.answer == s.answer && exp.supporting_fact == s.supporting_fact;
    // The context must be the first prefix_length utterances of the source.
    ok = ok && s.context.size() == s.prefix_length;
    for (std::size_t i = 0; ok && i < s.context.size(); ++i) ok = s.context[i] == tokenize(d.texts[i]);
    if (!ok) {
      INFO("dialog " << s.dialog_id << " prefix " << s.prefix_length << " slot " << s.slot << " task "
                     << task_name(s.task) << ": got " << s.answer << ", oracle " << exp.answer);
      CHECK(ok);
    } else {
      ++agree;
    }
  }
  CHECK(agree == samples.size());
}

std::string records_text(const std::vector<Dialog>& dialogs) {
  std::ostringstream out;
  write_dialog_corpus(out, dialogs);
  return out.str();
}

}  // namespace

TEST_CASE("question templates") {
  CHECK(question_text(Task::factoid, "area") == "what is the area ?");
  CHECK(question_text(Task::yesno, "area", "north") == "is the area north ?");
  CHECK(question_text(Task::indefinite, "food", "indian") == "is the food indian ?");
  CHECK(question_text(Task::count, "food") == "how many food are requested ?");
  CHECK(question_text(Task::list, "area") == "what are the area requested ?");
  CHECK(count_word(1) == "one");
  CHECK(count_word(2) == "two");
  CHECK(count_word(20) == "twenty");
  CHECK(count_word(21) == "21");
  CHECK(list_label({"west", "east"}) == "east+west");
}

TEST_CASE("appendix examples") {
  auto ds = appendix();
  const auto& ont = default_ontology();

  auto food = expand_subdialogs(by_id(ds, "food-italian"));
  REQUIRE(food.size() == 11);
  auto s = gen_factoid(food.back(), "food");
  CHECK(s.answer == "italian");
  CHECK(s.supporting_fact == 3u);

  auto price = expand_subdialogs(by_id(ds, "price-dontcare"));
  s = gen_factoid(price.back(), "pricerange");
  CHECK(s.answer == "dontcare");
  CHECK(s.supporting_fact == 3u);

  auto area = expand_subdialogs(by_id(ds, "area-north"));
  s = gen_factoid(area.back(), "area");
  CHECK(s.answer == "north");
  CHECK(s.supporting_fact == 5u);
  s = gen_factoid(area.front(), "area");
  CHECK(s.answer == "none");
  CHECK_FALSE(s.supporting_fact.has_value());

  // Yes/no: whatever value is queried, the answer must match the state.
  auto yn = expand_subdialogs(by_id(ds, "yesno-area"));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    s = gen_yesno(yn.back(), "area", ont, rng);
    CHECK(s.supporting_fact == 1u);
    CHECK(s.answer == (join_tokens(s.question) == "is the area north" ? "yes" : "no"));
  }

  auto ik = expand_subdialogs(by_id(ds, "maybe-food"));
  std::mt19937_64 rng(1);
  s = gen_indefinite(ik.back(), "food", ont, rng);
  CHECK(s.answer == "maybe");
  CHECK_THROWS_AS(gen_indefinite(ik.back(), "area", ont, rng), InvalidArgument);
  CHECK_THROWS_AS(gen_yesno(ik.back(), "food", ont, rng), InvalidArgument);

  auto ct = expand_subdialogs(by_id(ds, "count-food"));
  s = gen_count(ct.back(), "food");
  CHECK(s.answer == "two");
  CHECK(s.supporting_fact == 1u);

  auto ls = expand_subdialogs(by_id(ds, "list-area"));
  s = gen_list(ls.back(), "area");
  CHECK(s.answer == "east+west");
  CHECK(s.supporting_fact == 1u);
}

TEST_CASE("appendix area factoid serializes to the documented block") {
  auto ds = appendix();
  auto subs = expand_subdialogs(by_id(ds, "area-north"));
  std::vector<QASample> one{gen_factoid(subs.back(), "area")};
  std::ostringstream out;
  write_task_file(out, one);
  CHECK(out.str() ==
        "1 i'm looking for italian food\n"
        "2 would you like something in the cheap moderate or expensive price range\n"
        "3 moderate\n"
        "4 what part of town do you have in mind\n"
        "5 north\n"
        "6 sorry there is no moderate restaurant in the north of town serving italian food\n"
        "7 thank you good bye\n"
        "8 what is the area ?\tnorth\t5\n");
}

TEST_CASE("subdialog expansion") {
  auto ds = appendix();
  for (const auto& d : ds) {
    auto subs = expand_subdialogs(d);
    REQUIRE(subs.size() == d.size());
    for (std::size_t t = 0; t < subs.size(); ++t) {
      CHECK(subs[t].length() == t + 1);
      CHECK(subs[t].state() == d.states[t]);
    }
  }
}

TEST_CASE("oracle agreement on a 50-dialog synthetic corpus, all tasks") {
  const auto& ont = default_ontology();
  auto text = synth::corpus_text(domain_of(ont), 50, 2024);
  std::istringstream in(text);
  auto dialogs = parse_dialog_corpus(in, ont);
  REQUIRE(dialogs.size() == 50);
  std::size_t turns = 0;
  for (const auto& d : dialogs) turns += d.size();

  for (Task t : kAllTasks) {
    auto samples = generate_task(dialogs, t, ont, 5);
    INFO("task " << task_name(t));
    check_against_oracle(text, samples);
    if (t == Task::factoid) CHECK(samples.size() == turns * 3);
  }
}

TEST_CASE("indefinite is the yes/no set plus maybe samples") {
  const auto& ont = default_ontology();
  auto text = synth::corpus_text(domain_of(ont), 40, 77);
  std::istringstream in(text);
  auto dialogs = parse_dialog_corpus(in, ont);
  auto yn = generate_task(dialogs, Task::yesno, ont, 9);
  auto ik = generate_task(dialogs, Task::indefinite, ont, 9);
  CHECK(ik.size() >= yn.size());
  std::vector<QASample> informed;
  std::size_t maybes = 0;
  for (auto s : ik) {
    if (s.answer == "maybe") {
      ++maybes;
      continue;
    }
    s.task = Task::yesno;
    informed.push_back(s);
  }
  CHECK(informed == yn);
  CHECK(maybes + yn.size() == ik.size());
  CHECK(maybes > 0);
}

TEST_CASE("generation is deterministic for a fixed seed") {
  const auto& ont = default_ontology();
  auto text = synth::corpus_text(domain_of(ont), 10, 3);
  std::istringstream a(text), b(text);
  auto da = parse_dialog_corpus(a, ont);
  auto db = parse_dialog_corpus(b, ont);
  for (Task t : kAllTasks) {
    std::ostringstream oa, ob;
    write_task_file(oa, generate_task(da, t, ont, 11));
    write_task_file(ob, generate_task(db, t, ont, 11));
    CHECK(oa.str() == ob.str());
  }
}

TEST_CASE("task file round trip") {
  const auto& ont = default_ontology();
  auto text = synth::corpus_text(domain_of(ont), 60, 8);
  std::istringstream in(text);
  auto dialogs = parse_dialog_corpus(in, ont);
  std::vector<QASample> samples;
  for (Task t : kAllTasks) {
    auto part = generate_task(dialogs, t, ont, 1);
    samples.insert(samples.end(), part.begin(), part.end());
  }
  REQUIRE(samples.size() >= 1000);

  std::ostringstream file, index;
  write_task_file(file, samples);
  write_task_index(index, samples);
  std::istringstream fin(file.str()), iin(index.str());
  auto back = read_task_file(fin, &iin);
  CHECK(back == samples);

  std::ostringstream again;
  write_task_file(again, back);
  CHECK(again.str() == file.str());
}

TEST_CASE("task file without index derives provenance") {
  auto ds = appendix();
  auto samples = generate_task({by_id(ds, "area-north")}, Task::factoid, default_ontology(), 1);
  std::ostringstream out;
  write_task_file(out, samples);
  std::istringstream in(out.str());
  auto back = read_task_file(in);
  REQUIRE(back.size() == samples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].slot == samples[i].slot);
    CHECK(back[i].task == Task::factoid);
    CHECK(back[i].prefix_length == samples[i].prefix_length);
    CHECK(back[i].answer == samples[i].answer);
    CHECK(back[i].dialog_id == back[0].dialog_id);
  }
}

TEST_CASE("task file parse errors carry line numbers") {
  auto err = [](const std::string& text) {
    std::istringstream in(text);
    try {
      read_task_file(in);
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(err("1 hello\n3 what is the area ?\tnorth\t1\n").find("line 2") != std::string::npos);
  CHECK(err("1 hello\n2 what is the area ?\tnorth\n").find("line 2") != std::string::npos);
  CHECK(err("1 hello\n2 what is the area ?\tnorth\tx\n").find("line 2") != std::string::npos);
  CHECK(err("1 hello\n2 hi\n").find("without a question") != std::string::npos);
  CHECK(err("1 hello\n2 what is the area ?\tnorth\t\n").empty());
}

TEST_CASE("answer vocabulary") {
  const auto& ont = default_ontology();
  std::vector<QASample> train(2);
  train[0].answer = "two";
  train[1].answer = "east+west";
  auto av = build_answer_vocabulary(train, ont);
  for (const char* label : {"yes", "no", "maybe", "none", "dontcare", "two", "east+west", "north"})
    CHECK(av.find(label).has_value());
  CHECK(av.size() == 5 + 91 + 3 + 5 + 2);
  CHECK_FALSE(av.find("three").has_value());
}

TEST_CASE("validation split is dialog level") {
  const auto& ont = default_ontology();
  auto text = synth::corpus_text(domain_of(ont), 30, 5);
  std::istringstream in(text);
  auto samples = generate_task(parse_dialog_corpus(in, ont), Task::factoid, ont, 1);
  auto split = split_train_validation(samples, 0.1, 42);
  std::set<std::string> tr, va;
  for (const auto& s : split.train) tr.insert(s.dialog_id);
  for (const auto& s : split.validation) va.insert(s.dialog_id);
  CHECK(va.size() == 3);
  CHECK(tr.size() == 27);
  for (const auto& id : va) CHECK_FALSE(tr.contains(id));
  CHECK(split.train.size() + split.validation.size() == samples.size());
  CHECK_THROWS_AS(split_train_validation(samples, 0.0, 1), InvalidArgument);
  CHECK_THROWS_AS(split_train_validation(samples, 1.0, 1), InvalidArgument);
}

TEST_CASE("augmentation records recount the state changes") {
  const auto& ont = default_ontology();
  auto templates = AugmentationTemplates::defaults();
  auto text = synth::corpus_text(domain_of(ont), 50, 99);
  std::istringstream in(text);
  auto dialogs = parse_dialog_corpus(in, ont);
  std::size_t total_sub = 0, total_add = 0;

  for (std::size_t d = 0; d < dialogs.size(); ++d) {
    const auto& orig = dialogs[d];
    auto rng = stream_rng(1, d, 3);
    auto aug = augment_dialog(orig, {0.7, 0.7}, templates, ont, rng);
    const auto& out = aug.dialog;

    std::set<std::size_t> inserted;
    for (const auto& r : aug.records)
      if (r.kind == AugmentationRecord::Kind::addition) inserted.insert(r.index);
    REQUIRE(out.size() == orig.size() + inserted.size());

    // Map augmented positions back to the original turn they copy.
    std::vector<std::size_t> source(out.size() + 1, 0);
    std::size_t t = 0;
    for (std::size_t p = 1; p <= out.size(); ++p) {
      if (inserted.contains(p)) {
        CHECK(out.utterances[p - 1].speaker == Speaker::customer);
        CHECK(t >= 1);  // never before the informing turn
        CHECK(p < out.size());  // never after the final original turn
        source[p] = t;
      } else {
        source[p] = ++t;
        CHECK(out.utterances[p - 1].speaker == orig.utterances[t - 1].speaker);
      }
    }
    CHECK(t == orig.size());

    for (std::size_t p = 1; p <= out.size(); ++p) {
      SlotState expected = source[p] ? orig.states[source[p] - 1] : SlotState{};
      for (const auto& r : aug.records)
        if (r.index <= p) expected.add(r.slot, r.added);
      CHECK(out.states[p - 1] == expected);
      CHECK(out.utterances[p - 1].index == p);
    }

    for (const auto& r : aug.records) {
      const auto& u = out.utterances.at(r.index - 1);
      CHECK(lower(u.text).find(r.added) != std::string::npos);
      CHECK(ont.allows(r.slot, r.added));
      if (r.kind == AugmentationRecord::Kind::substitution) {
        ++total_sub;
        CHECK(lower(u.text).find(r.original) != std::string::npos);
        CHECK(u.text != orig.utterances[source[r.index] - 1].text);
      } else {
        ++total_add;
      }
    }

    // The oracle over the augmented record text agrees with every task.
    auto augmented_text = records_text({out});
    for (Task task : {Task::count, Task::list, Task::factoid})
      check_against_oracle(augmented_text, generate_task({out}, task, ont, 2));
  }
  CHECK(total_sub > 0);
  CHECK(total_add > 0);
}

TEST_CASE("augmentation with zero probabilities is the identity") {
  const auto& ont = default_ontology();
  auto text = synth::corpus_text(domain_of(ont), 10, 4);
  std::istringstream in(text);
  auto dialogs = parse_dialog_corpus(in, ont);
  std::mt19937_64 rng(1);
  for (const auto& d : dialogs) {
    auto aug = augment_dialog(d, {0.0, 0.0}, AugmentationTemplates::defaults(), ont, rng);
    CHECK(aug.dialog == d);
    CHECK(aug.records.empty());
  }
}

TEST_CASE("R1 follows the substitution pattern") {
  Ontology ont;
  ont.add_slot("area", {"north", "west"});
  std::istringstream in("# dialog x\n1|cust|I want the North please|area=north\n2|agent|ok|area=north\n");
  auto d = parse_dialog_corpus(in, ont).front();
  AugmentationTemplates t;
  t.add("area", "<ORIG> or the <VALUE> of town");
  std::mt19937_64 rng(1);
  auto aug = augment_dialog(d, {1.0, 0.0}, t, ont, rng);
  CHECK(aug.dialog.utterances[0].text == "I want the North or the west of town please");
  CHECK(aug.dialog.states[1].values("area") == SlotState::ValueSet{"north", "west"});
  REQUIRE(aug.records.size() == 1);
  CHECK(aug.records[0].index == 1);
}

TEST_CASE("template parsing") {
  std::istringstream ok("# c\narea | <ORIG> or <VALUE>\narea | i would also accept <VALUE>\n");
  auto t = AugmentationTemplates::parse(ok);
  CHECK(t.substitutions("area").size() == 1);
  CHECK(t.additions("area").size() == 1);
  std::istringstream bad("area | no hole\n");
  CHECK_THROWS_AS(AugmentationTemplates::parse(bad), ParseError);
  auto defaults = AugmentationTemplates::defaults();
  for (const char* slot : {"area", "food", "pricerange"}) {
    CHECK(defaults.substitutions(slot).size() >= 1);
    CHECK(defaults.additions(slot).size() >= 1);
    CHECK(defaults.substitutions(slot).size() + defaults.additions(slot).size() >= 3);
  }
}

TEST_CASE("question templates never tokenize to UNK") {
  const auto& ont = default_ontology();
  auto text = synth::corpus_text(domain_of(ont), 5, 1);
  std::istringstream in(text);
  auto dialogs = parse_dialog_corpus(in, ont);
  auto questions = all_question_texts(ont);
  auto vocab = build_vocabulary(dialogs, questions);
  for (const auto& q : questions)
    for (const auto& tok : tokenize(q)) CHECK(vocab.find(tok).has_value());
}
