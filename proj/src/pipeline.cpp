// Copyright (c) 2026 The dialog-reader Authors
// SPDX-License-Identifier: Apache-2.0

#include "mrdt/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "mrdt/error.hpp"
#include "resources.hpp"
#include "text_util.hpp"

namespace mrdt {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// RunConfig

namespace {

const std::vector<std::pair<std::string, std::string>>& default_entries() {
  static const std::vector<std::pair<std::string, std::string>> entries = {
      {"corpus", ""},         {"ontology", ""},       {"templates", ""},
      {"task", "factoid"},    {"augment-r1", ""},     {"augment-r2", ""},
      {"seed", "1"},          {"dim", "40"},          {"hops", "5"},
      {"tying", "adjacent"},  {"epochs", "100"},      {"lr", "0.005"},
      {"batch", "16"},        {"clip", "40"},         {"linear-start", "20"},
      {"decay-every", "25"},  {"decay-factor", "0.5"}, {"memory-size", "0"},
      {"loss-reduction", "sum"},
      {"val-fraction", "0.1"}, {"model", "model.mrdt"}, {"out", ""},
      {"sweep-d", ""},        {"workers", "1"},       {"data", ""},
      {"embeddings", ""},     {"metrics", ""},        {"all-hops", "false"},
      {"dialog", ""},         {"prefix", "0"},        {"slot", ""},
  };
  return entries;
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& [k, v] : default_entries()) values_.emplace(k, v);
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [k, v] : default_entries()) out.push_back(k);
    std::sort(out.begin(), out.end());
    return out;
  }();
  return keys;
}

void RunConfig::set(std::string_view key, std::string value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw InvalidArgument(fmt::format("unknown configuration key '{}'", key));
  it->second = std::move(value);
}

const std::string& RunConfig::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw InvalidArgument(fmt::format("unknown configuration key '{}'", key));
  return it->second;
}

std::int64_t RunConfig::get_int(std::string_view key) const {
  const auto& s = get(key);
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw InvalidArgument(fmt::format("'{}' must be an integer, got '{}'", key, s));
  return v;
}

std::uint64_t RunConfig::get_uint(std::string_view key) const {
  auto v = get_int(key);
  if (v < 0) throw InvalidArgument(fmt::format("'{}' must be non-negative, got {}", key, v));
  return static_cast<std::uint64_t>(v);
}

double RunConfig::get_double(std::string_view key) const {
  const auto& s = get(key);
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw InvalidArgument(fmt::format("'{}' must be a number, got '{}'", key, s));
}

bool RunConfig::get_bool(std::string_view key) const {
  const auto& s = get(key);
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s.empty() || s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw InvalidArgument(fmt::format("'{}' must be a boolean, got '{}'", key, s));
}

std::vector<std::string> RunConfig::get_list(std::string_view key) const {
  std::vector<std::string> out;
  for (auto part : detail::split(get(key), ',')) {
    auto t = detail::trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

void RunConfig::parse(std::istream& in, std::string_view origin) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ParseError(fmt::format("{} line {}: expected key=value", origin, line_no));
    auto key = detail::trim(body.substr(0, eq));
    try {
      set(key, std::string(detail::trim(body.substr(eq + 1))));
    } catch (const InvalidArgument& e) {
      throw ParseError(fmt::format("{} line {}: {}", origin, line_no, e.what()));
    }
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config file '{}'", path));
  parse(in, path);
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& [k, v] : values_) out += fmt::format("{}={}\n", k, v);
  return out;
}

// ---------------------------------------------------------------------------
// Shared helpers

const Ontology& default_ontology() {
  static const Ontology ont = [] {
    std::istringstream in{std::string(detail::default_ontology_text())};
    return Ontology::parse(in);
  }();
  return ont;
}

Ontology resolve_ontology(const RunConfig& config) {
  return config.is_set("ontology") ? Ontology::load(config.get("ontology")) : default_ontology();
}

TrainConfig train_config_from(const RunConfig& config) {
  TrainConfig tc;
  tc.lr0 = config.get_double("lr");
  tc.decay_every = config.get_uint("decay-every");
  tc.decay_factor = config.get_double("decay-factor");
  tc.max_epochs = config.get_uint("epochs");
  tc.linear_start_epochs = config.get_uint("linear-start");
  tc.batch_size = config.get_uint("batch");
  tc.clip_norm = config.get_double("clip");
  tc.seed = config.get_uint("seed");
  tc.dim = config.get_uint("dim");
  tc.hops = config.get_uint("hops");
  auto tying = parse_tying(config.get("tying"));
  if (!tying) throw InvalidArgument(fmt::format("unknown tying scheme '{}'", config.get("tying")));
  tc.tying = *tying;
  tc.memory_capacity = config.get_uint("memory-size");
  auto reduction = parse_reduction(config.get("loss-reduction"));
  if (!reduction)
    throw InvalidArgument(fmt::format("unknown loss reduction '{}' (sum or mean)", config.get("loss-reduction")));
  tc.reduction = *reduction;
  tc.workers = std::max<std::size_t>(1, config.get_uint("workers"));
  tc.validate();
  return tc;
}

Vocabulary model_vocabulary(std::span<const QASample> train, const Ontology& ontology,
                            const AnswerVocabulary& answers,
                            std::vector<std::uint32_t>& answer_columns) {
  Vocabulary vocab;
  for (const auto& s : train) {
    for (const auto& utt : s.context)
      for (const auto& t : utt) vocab.add(t);
    for (const auto& t : s.question) vocab.add(t);
  }
  for (const auto& q : all_question_texts(ontology))
    for (const auto& t : tokenize(q)) vocab.add(t);
  answer_columns.clear();
  for (const auto& label : answers.labels()) answer_columns.push_back(vocab.add(label));
  return vocab;
}

TrainData prepare_training_data(std::span<const QASample> samples, const Ontology& ontology,
                                double validation_fraction, std::uint64_t seed) {
  if (samples.empty()) throw InvalidArgument("no training samples");
  auto split = split_train_validation(samples, validation_fraction, seed);
  TrainData data;
  data.answers = build_answer_vocabulary(split.train, ontology);
  data.vocab = model_vocabulary(split.train, ontology, data.answers, data.answer_columns);
  for (const auto& s : split.train) data.train.push_back(encode_sample(s, data.vocab, data.answers));
  for (const auto& s : split.validation)
    data.validation.push_back(encode_sample(s, data.vocab, data.answers));
  return data;
}

void check_vocabulary_compatible(const ModelBundle& model, std::span<const QASample> samples) {
  for (const auto& s : samples)
    for (const auto& t : s.question)
      if (!model.vocab.find(t))
        throw InvalidArgument(fmt::format(
            "vocabulary mismatch: question token '{}' (\"{} ?\") is unknown to the model", t,
            join_tokens(s.question)));
}

namespace {

std::vector<Task> requested_tasks(const RunConfig& config) {
  std::vector<Task> tasks;
  for (const auto& name : config.get_list("task")) {
    if (name == "all") return {std::begin(kAllTasks), std::end(kAllTasks)};
    auto t = parse_task(name);
    if (!t) throw InvalidArgument(fmt::format("unknown task '{}'", name));
    tasks.push_back(*t);
  }
  if (tasks.empty()) throw InvalidArgument("no task requested");
  return tasks;
}

std::vector<QASample> load_nonempty(const std::string& path) {
  auto samples = load_task_file(path);
  if (samples.empty()) throw InvalidArgument(fmt::format("task file '{}' holds no samples", path));
  return samples;
}

constexpr std::uint64_t kAugmentStream = 3;

}  // namespace

// ---------------------------------------------------------------------------
// convert

std::string cmd_convert(const RunConfig& config) {
  if (!config.is_set("corpus")) throw InvalidArgument("convert needs --corpus");
  auto ontology = resolve_ontology(config);
  auto templates = config.is_set("templates") ? AugmentationTemplates::load(config.get("templates"))
                                              : AugmentationTemplates::defaults();
  auto dialogs = load_dialog_corpus(config.get("corpus"), ontology);
  const auto seed = config.get_uint("seed");
  fs::path out_dir = config.is_set("out") ? fs::path(config.get("out")) : fs::path(".");
  fs::create_directories(out_dir);

  std::string report = fmt::format("corpus: {} dialogs, {} utterances\n", dialogs.size(), [&] {
    std::size_t n = 0;
    for (const auto& d : dialogs) n += d.size();
    return n;
  }());
  for (Task task : requested_tasks(config)) {
    const bool reasoning_set = task == Task::count || task == Task::list;
    AugmentationRules rules;
    rules.substitution = config.is_set("augment-r1") ? config.get_double("augment-r1") : (reasoning_set ? 0.5 : 0.0);
    rules.addition = config.is_set("augment-r2") ? config.get_double("augment-r2") : (reasoning_set ? 0.5 : 0.0);
    for (double p : {rules.substitution, rules.addition})
      if (p < 0.0 || p > 1.0) throw InvalidArgument(fmt::format("augmentation probability {} outside [0, 1]", p));

    std::vector<Dialog> source;
    std::size_t records = 0;
    if (rules.substitution > 0.0 || rules.addition > 0.0) {
      for (std::size_t d = 0; d < dialogs.size(); ++d) {
        auto rng = stream_rng(seed, d, kAugmentStream);
        auto aug = augment_dialog(dialogs[d], rules, templates, ontology, rng);
        records += aug.records.size();
        source.push_back(std::move(aug.dialog));
      }
    } else {
      source = dialogs;
    }
    auto samples = generate_task(source, task, ontology, seed);
    auto answers = build_answer_vocabulary(samples, ontology);
    auto path = out_dir / fmt::format("{}.txt", task_name(task));
    save_task_file(path.string(), samples);
    report += fmt::format("{}: {} samples, answer vocabulary {} labels, {} augmentations -> {}\n",
                          task_name(task), samples.size(), answers.size(), records, path.string());
  }
  return report;
}

// ---------------------------------------------------------------------------
// train

std::string cmd_train(const RunConfig& config) {
  if (!config.is_set("data")) throw InvalidArgument("train needs --data <task file>");
  auto ontology = resolve_ontology(config);
  auto tc = train_config_from(config);
  auto samples = load_nonempty(config.get("data"));
  auto data = prepare_training_data(samples, ontology, config.get_double("val-fraction"), tc.seed);

  std::vector<std::size_t> dims;
  for (const auto& d : config.get_list("sweep-d")) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(d.data(), d.data() + d.size(), v);
    if (ec != std::errc() || p != d.data() + d.size() || v == 0)
      throw InvalidArgument(fmt::format("bad --sweep-d entry '{}'", d));
    dims.push_back(v);
  }
  if (dims.empty()) dims.push_back(tc.dim);

  std::string report = fmt::format(
      "training on {} samples ({} validation), vocabulary {}, answers {}\n", data.train.size(),
      data.validation.size(), data.vocab.size(), data.answers.size());
  const std::string model_path = config.get("model");
  const std::string log_path = config.is_set("out") ? config.get("out") : model_path + ".log";

  std::optional<TrainResult> best;
  double best_acc = -1.0;
  std::size_t best_dim = 0;
  for (auto d : dims) {
    TrainConfig run = tc;
    run.dim = d;
    std::optional<Matrix> pretrained;
    if (config.is_set("embeddings")) {
      std::mt19937_64 rng(tc.seed + 1);
      pretrained = load_pretrained_embeddings(config.get("embeddings"), data.vocab, d, rng);
    }
    auto result = train(data, run, pretrained ? &*pretrained : nullptr);
    const auto& rec = result.history.epochs.at(result.history.best_epoch - 1);
    report += fmt::format("d={}: best epoch {}, validation accuracy {:.4f}, validation loss {:.4f}\n",
                          d, rec.epoch, rec.val_acc, rec.val_loss);
    if (dims.size() > 1) {
      std::ofstream log(fmt::format("{}.d{}", log_path, d));
      result.history.write_log(log);
    }
    if (rec.val_acc > best_acc) {
      best_acc = rec.val_acc;
      best_dim = d;
      best = std::move(result);
    }
  }

  ModelBundle bundle{std::move(best->params), data.vocab, data.answers};
  save_params(bundle, model_path);
  {
    std::ofstream log(log_path);
    if (!log) throw IoError(fmt::format("cannot write history log '{}'", log_path));
    best->history.write_log(log);
  }
  report += fmt::format("selected d={}; model -> {}; history -> {}\n", best_dim, model_path, log_path);
  return report;
}

// ---------------------------------------------------------------------------
// eval

std::string format_eval_table(const std::vector<EvalReport>& reports,
                              const std::vector<std::string>& slots) {
  std::string out;
  for (const auto& rep : reports) {
    bool has_factoid = false;
    for (const auto& c : rep.cells) has_factoid |= c.task == Task::factoid;
    if (!has_factoid) continue;
    out += fmt::format("{:<22}", "factoid");
    for (const auto& s : slots) out += fmt::format("{:>12}", s);
    out += fmt::format("{:>12}\n", "joint");
    out += fmt::format("{:<22}", "all prefixes");
    for (const auto& s : slots) {
      const auto* c = rep.find(Task::factoid, s);
      out += c ? fmt::format("{:>12.4f}", c->accuracy()) : fmt::format("{:>12}", "-");
    }
    out += rep.joint ? fmt::format("{:>12.4f}\n", rep.joint->accuracy()) : fmt::format("{:>12}\n", "-");
    out += fmt::format("{:<22}", "informed prefixes");
    for (const auto& s : slots) {
      const auto* c = rep.find(Task::factoid, s);
      out += c ? fmt::format("{:>12.4f}", c->informed_accuracy()) : fmt::format("{:>12}", "-");
    }
    out += fmt::format("{:>12}\n\n", "-");
  }

  std::vector<Task> reasoning;
  for (Task t : {Task::yesno, Task::indefinite, Task::count, Task::list})
    for (const auto& rep : reports)
      if (std::ranges::any_of(rep.cells, [&](const auto& c) { return c.task == t; })) {
        reasoning.push_back(t);
        break;
      }
  if (!reasoning.empty()) {
    static constexpr auto header = [](Task t) -> std::string_view {
      switch (t) {
        case Task::yesno: return "yes-no";
        case Task::indefinite: return "i.k.";
        case Task::count: return "count.";
        case Task::list: return "list.";
        default: return "factoid";
      }
    };
    out += fmt::format("{:<22}", "variable");
    for (Task t : reasoning) out += fmt::format("{:>12}", header(t));
    out += '\n';
    for (const auto& s : slots) {
      out += fmt::format("{:<22}", s);
      for (Task t : reasoning) {
        const SlotScore* cell = nullptr;
        for (const auto& rep : reports)
          if (!cell) cell = rep.find(t, s);
        out += cell ? fmt::format("{:>12.4f}", cell->accuracy()) : fmt::format("{:>12}", "-");
      }
      out += '\n';
    }
    out += '\n';
  }

  out += fmt::format("{:<12}{:<14}{:>8}{:>10}{:>14}{:>10}\n", "task", "slot", "n", "correct",
                     "unanswerable", "accuracy");
  for (const auto& rep : reports)
    for (const auto& c : rep.cells)
      out += fmt::format("{:<12}{:<14}{:>8}{:>10}{:>14}{:>10.4f}\n", task_name(c.task), c.slot, c.n,
                         c.correct, c.unanswerable, c.accuracy());
  return out;
}

std::string cmd_eval(const RunConfig& config) {
  auto models = config.get_list("model");
  auto files = config.get_list("data");
  if (models.empty()) throw InvalidArgument("eval needs --model");
  if (files.empty()) throw InvalidArgument("eval needs --data <task file>");
  if (models.size() != 1 && models.size() != files.size())
    throw InvalidArgument(fmt::format("{} models given for {} task files", models.size(), files.size()));
  auto ontology = resolve_ontology(config);
  const std::size_t workers = std::max<std::size_t>(1, config.get_uint("workers"));

  std::vector<EvalReport> reports;
  std::optional<ModelBundle> shared;
  for (std::size_t i = 0; i < files.size(); ++i) {
    std::optional<ModelBundle> own;
    if (models.size() == 1) {
      if (!shared) shared = load_params(models.front());
    } else {
      own = load_params(models[i]);
    }
    const ModelBundle& model = own ? *own : *shared;
    auto samples = load_nonempty(files[i]);
    check_vocabulary_compatible(model, samples);
    reports.push_back(evaluate(model, samples, ontology.slots(), workers));
  }

  if (config.is_set("metrics")) {
    std::ofstream csv(config.get("metrics"));
    if (!csv) throw IoError(fmt::format("cannot write metrics file '{}'", config.get("metrics")));
    csv << "task,slot,n,accuracy\n";
    for (const auto& rep : reports) {
      for (const auto& c : rep.cells)
        csv << fmt::format("{},{},{},{:.6f}\n", task_name(c.task), c.slot, c.n, c.accuracy());
      if (rep.joint) csv << fmt::format("factoid,joint,{},{:.6f}\n", rep.joint->groups, rep.joint->accuracy());
    }
  }
  return format_eval_table(reports, ontology.slots());
}

// ---------------------------------------------------------------------------
// inspect

namespace {

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

std::string cmd_inspect(const RunConfig& config) {
  if (!config.is_set("data")) throw InvalidArgument("inspect needs --data <task file>");
  if (!config.is_set("dialog")) throw InvalidArgument("inspect needs --dialog <id>");
  auto model = load_params(config.get("model"));
  auto samples = load_nonempty(config.get("data"));
  check_vocabulary_compatible(model, samples);
  const auto& id = config.get("dialog");
  const auto prefix = config.get_uint("prefix");
  const auto& slot = config.get("slot");

  std::vector<const QASample*> matches;
  for (const auto& s : samples)
    if (s.dialog_id == id && (prefix == 0 || s.prefix_length == prefix) && (slot.empty() || s.slot == slot))
      matches.push_back(&s);
  if (matches.empty()) {
    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (const auto& s : samples)
      if (seen.insert(s.dialog_id).second) ids.push_back(s.dialog_id);
    std::stable_sort(ids.begin(), ids.end(), [&](const auto& a, const auto& b) {
      return edit_distance(a, id) < edit_distance(b, id);
    });
    ids.resize(std::min<std::size_t>(ids.size(), 5));
    std::string nearest;
    for (const auto& n : ids) nearest += (nearest.empty() ? "" : ", ") + n;
    throw InvalidArgument(fmt::format("no sample matches dialog '{}', prefix {}, slot '{}'; nearest ids: {}",
                                      id, prefix, slot.empty() ? "*" : slot, nearest));
  }

  const bool all_hops = config.get_bool("all-hops");
  std::string out;
  for (const auto* s : matches) {
    auto rep = attention_report(model, *s);
    if (!all_hops && !rep.weights.empty()) {
      rep.first_hop = rep.weights.front().size();
      for (auto& row : rep.weights) row.erase(row.begin(), row.end() - 1);
    }
    out += fmt::format("dialog {} prefix {} slot {} ({}), gold: {}\n", s->dialog_id, s->prefix_length,
                       s->slot, task_name(s->task), s->answer);
    out += rep.text();
    out += "attention weights (post-softmax p per hop):\n";
    out += rep.csv();
    out += '\n';
  }
  return out;
}

}  // namespace mrdt
