// Copyright (c) 2026 The dialog-reader Authors
// SPDX-License-Identifier: Apache-2.0

#include "mrdt/c_api.h"

#include <cstdlib>
#include <cstring>
#include <limits>
#include <string>

#include "mrdt/error.hpp"
#include "mrdt/pipeline.hpp"

struct mrdt_config {
  mrdt::RunConfig config;
};

struct mrdt_model {
  mrdt::ModelBundle bundle;
};

namespace {

thread_local std::string g_last_error;

mrdt_status fail(mrdt_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <typename Fn>
mrdt_status guarded(Fn&& fn) {
  try {
    fn();
    return MRDT_OK;
  } catch (const mrdt::ParseError& e) {
    return fail(MRDT_ERR_PARSE, e.what());
  } catch (const mrdt::FormatError& e) {
    return fail(MRDT_ERR_FORMAT, e.what());
  } catch (const mrdt::IoError& e) {
    return fail(MRDT_ERR_IO, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(MRDT_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return fail(MRDT_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(MRDT_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MRDT_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (!p) throw mrdt::InvalidArgument(std::string(what) + " is null");
}

mrdt::QASample make_sample(const char* const* utterances, size_t n, const char* question) {
  require(question, "question");
  if (n > 0) require(utterances, "utterances");
  mrdt::QASample s;
  for (size_t i = 0; i < n; ++i) {
    require(utterances[i], "utterance");
    s.context.push_back(mrdt::tokenize(utterances[i]));
  }
  s.question = mrdt::tokenize(question);
  s.prefix_length = n;
  return s;
}

mrdt_status run(const mrdt_config* config, char** report,
                std::string (*cmd)(const mrdt::RunConfig&)) {
  return guarded([&] {
    require(config, "config");
    auto text = cmd(config->config);
    if (report) *report = dup_string(text);
  });
}

}  // namespace

extern "C" {

const char* mrdt_last_error(void) { return g_last_error.c_str(); }

const char* mrdt_status_name(mrdt_status status) {
  switch (status) {
    case MRDT_OK: return "ok";
    case MRDT_ERR_INVALID_ARGUMENT: return "invalid argument";
    case MRDT_ERR_PARSE: return "parse error";
    case MRDT_ERR_FORMAT: return "format error";
    case MRDT_ERR_IO: return "i/o error";
    case MRDT_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void mrdt_string_free(char* s) { std::free(s); }

mrdt_status mrdt_config_create(mrdt_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new mrdt_config{};
  });
}

void mrdt_config_free(mrdt_config* config) { delete config; }

mrdt_status mrdt_config_set(mrdt_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    config->config.set(key, value);
  });
}

mrdt_status mrdt_config_get(const mrdt_config* config, const char* key, char** value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    *value = dup_string(config->config.get(key));
  });
}

mrdt_status mrdt_config_load_file(mrdt_config* config, const char* path) {
  return guarded([&] {
    require(config, "config");
    require(path, "path");
    config->config.load_file(path);
  });
}

mrdt_status mrdt_config_dump(const mrdt_config* config, char** text) {
  return guarded([&] {
    require(config, "config");
    require(text, "text");
    *text = dup_string(config->config.dump());
  });
}

mrdt_status mrdt_run_convert(const mrdt_config* config, char** report) {
  return run(config, report, &mrdt::cmd_convert);
}
mrdt_status mrdt_run_train(const mrdt_config* config, char** report) {
  return run(config, report, &mrdt::cmd_train);
}
mrdt_status mrdt_run_eval(const mrdt_config* config, char** report) {
  return run(config, report, &mrdt::cmd_eval);
}
mrdt_status mrdt_run_inspect(const mrdt_config* config, char** report) {
  return run(config, report, &mrdt::cmd_inspect);
}

mrdt_status mrdt_model_load(const char* path, mrdt_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new mrdt_model{mrdt::load_params(std::string(path))};
  });
}

mrdt_status mrdt_model_save(const mrdt_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    mrdt::save_params(model->bundle, std::string(path));
  });
}

void mrdt_model_free(mrdt_model* model) { delete model; }

mrdt_status mrdt_model_info_get(const mrdt_model* model, mrdt_model_info* info) {
  return guarded([&] {
    require(model, "model");
    require(info, "info");
    const auto& c = model->bundle.params.config();
    info->dim = c.dim;
    info->hops = c.hops;
    info->memory_capacity = c.memory_capacity;
    info->vocab_size = c.vocab_size;
    info->answer_size = c.answer_size;
    info->layerwise = c.tying == mrdt::Tying::layerwise ? 1 : 0;
  });
}

mrdt_status mrdt_model_predict(const mrdt_model* model, const char* const* utterances,
                               size_t n_utterances, const char* question, char** answer) {
  return guarded([&] {
    require(model, "model");
    require(answer, "answer");
    auto sample = make_sample(utterances, n_utterances, question);
    auto enc = mrdt::encode_sample(sample, model->bundle.vocab, model->bundle.answers);
    *answer = dup_string(model->bundle.answers.label(mrdt::predict(model->bundle.params, enc)));
  });
}

mrdt_status mrdt_model_attention(const mrdt_model* model, const char* const* utterances,
                                 size_t n_utterances, const char* question, double* weights,
                                 size_t capacity) {
  return guarded([&] {
    require(model, "model");
    require(weights, "weights");
    const size_t hops = model->bundle.params.config().hops;
    if (capacity < hops * n_utterances)
      throw mrdt::InvalidArgument("weights buffer holds " + std::to_string(capacity) +
                                  " entries, need " + std::to_string(hops * n_utterances));
    auto sample = make_sample(utterances, n_utterances, question);
    auto enc = mrdt::encode_sample(sample, model->bundle.vocab, model->bundle.answers);
    auto fr = mrdt::forward(model->bundle.params, enc.context, enc.question);
    for (size_t k = 0; k < hops; ++k)
      for (size_t i = 0; i < n_utterances; ++i) {
        auto mem = fr.trace.memory_of_position(i + 1, n_utterances);
        weights[k * n_utterances + i] =
            mem ? fr.trace.p[k][*mem] : std::numeric_limits<double>::quiet_NaN();
      }
  });
}

}  // extern "C"
