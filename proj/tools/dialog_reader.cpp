// Copyright (c) 2026 The dialog-reader Authors
// SPDX-License-Identifier: Apache-2.0
//
// dialog-reader: convert / train / eval / inspect.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "mrdt/c_api.h"

namespace {

struct Flag {
  const char* key;
  const char* help;
};

// Every option is accepted by every subcommand; unused ones are ignored.
constexpr Flag kFlags[] = {
    {"corpus", "dialog corpus file"},
    {"ontology", "slot ontology file (default: built-in)"},
    {"templates", "augmentation template file (default: built-in)"},
    {"task", "task(s): factoid, yesno, indefinite, count, list, or all (comma list)"},
    {"augment-r1", "probability of intra-utterance substitution"},
    {"augment-r2", "probability of inter-utterance addition"},
    {"seed", "random seed"},
    {"dim", "embedding size d"},
    {"hops", "number of hops K"},
    {"tying", "adjacent or layerwise"},
    {"epochs", "training epochs"},
    {"lr", "initial learning rate"},
    {"decay-every", "halve the learning rate every N epochs"},
    {"decay-factor", "learning-rate decay factor"},
    {"batch", "mini-batch size"},
    {"clip", "gradient-norm clipping threshold"},
    {"linear-start", "epochs trained with linear attention"},
    {"memory-size", "memory capacity (0: longest training context)"},
    {"loss-reduction", "combine batch losses by sum or mean"},
    {"val-fraction", "fraction of dialogs held out for validation"},
    {"model", "model container path(s)"},
    {"out", "output directory (convert) or history log (train)"},
    {"sweep-d", "comma list of embedding sizes to try"},
    {"workers", "worker threads"},
    {"data", "task file(s), comma separated"},
    {"embeddings", "pretrained word vectors (text format)"},
    {"metrics", "write task,slot,n,accuracy CSV here"},
    {"dialog", "inspect: dialog id"},
    {"prefix", "inspect: prefix length (0: all)"},
    {"slot", "inspect: slot (empty: all)"},
};

using RunFn = mrdt_status (*)(const mrdt_config*, char**);

struct ConfigDeleter {
  void operator()(mrdt_config* c) const { mrdt_config_free(c); }
};

bool check(mrdt_status status, const std::string& context) {
  if (status == MRDT_OK) return true;
  std::cerr << "dialog-reader: " << context << ": " << mrdt_last_error() << "\n";
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dialog state tracking as machine reading (memory networks)"};
  app.require_subcommand(1);

  const std::pair<const char*, RunFn> commands[] = {
      {"convert", &mrdt_run_convert},
      {"train", &mrdt_run_train},
      {"eval", &mrdt_run_eval},
      {"inspect", &mrdt_run_inspect},
  };
  const std::map<std::string, std::string> descriptions = {
      {"convert", "turn a dialog corpus into task files"},
      {"train", "train a memory network on a task file"},
      {"eval", "score models on task files"},
      {"inspect", "print attention weights for selected samples"},
  };

  // Each subcommand gets its own copy of the option set so --help lists it.
  struct Options {
    std::string config_file;
    std::map<std::string, std::string> values;
    bool all_hops = false;
  };
  std::map<std::string, Options> options;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, fn] : commands) {
    auto* sub = app.add_subcommand(name, descriptions.at(name));
    auto& o = options[name];
    sub->add_option("--config", o.config_file, "key=value configuration file");
    for (const auto& f : kFlags) sub->add_option(std::string("--") + f.key, o.values[f.key], f.help);
    sub->add_flag("--all-hops", o.all_hops, "inspect: print every hop");
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  for (const auto& [name, fn] : commands) {
    CLI::App* sub = subs[name];
    if (!sub->parsed()) continue;
    auto& o = options[name];

    mrdt_config* raw = nullptr;
    if (!check(mrdt_config_create(&raw), "config")) return 1;
    std::unique_ptr<mrdt_config, ConfigDeleter> config(raw);

    // Precedence: defaults, then the config file, then explicit flags.
    if (o.config_file.empty())
      if (const char* env = std::getenv("DIALOG_READER_CONFIG"); env && *env) o.config_file = env;
    if (!o.config_file.empty() && !check(mrdt_config_load_file(config.get(), o.config_file.c_str()), o.config_file))
      return 1;
    for (const auto& f : kFlags) {
      if (sub->count(std::string("--") + f.key) == 0) continue;
      if (!check(mrdt_config_set(config.get(), f.key, o.values[f.key].c_str()), std::string("--") + f.key))
        return 1;
    }
    if (o.all_hops && !check(mrdt_config_set(config.get(), "all-hops", "true"), "--all-hops")) return 1;

    char* dump = nullptr;
    if (!check(mrdt_config_dump(config.get(), &dump), "config")) return 1;
    std::cerr << "# resolved configuration\n" << dump;
    mrdt_string_free(dump);

    char* report = nullptr;
    if (!check(fn(config.get(), &report), name)) return 1;
    std::cout << report;
    mrdt_string_free(report);
    return 0;
  }
  return 1;
}
