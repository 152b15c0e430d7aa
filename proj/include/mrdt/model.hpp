// Copyright (c) 2026 The dialog-reader Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end memory network over utterance memories: parameters with hop
// tying, temporal memory encoding, multi-hop attention and answer prediction.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mrdt/corpus.hpp"
#include "mrdt/matrix.hpp"
#include "mrdt/taskgen.hpp"

namespace mrdt {

enum class Tying { adjacent, layerwise };

std::string_view tying_name(Tying t);
std::optional<Tying> parse_tying(std::string_view name);

struct ModelConfig {
  std::size_t dim = 20;
  std::size_t hops = 5;
  Tying tying = Tying::adjacent;
  std::size_t memory_capacity = 1;
  std::size_t answer_size = 0;
  std::size_t vocab_size = 0;
  bool linear_attention = false;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Trainable parameters. Embedding storages are kept token-major
/// (|V| x d, one row per token) so a token's embedding is contiguous; the
/// container format writes them as d x |V|. Logical matrices are views onto
/// a list of storages according to the tying scheme:
///
///   adjacent:  B, E0..EK, T0..TK;  A^k = E(k-1), C^k = Ek,
///              T_A^k = T(k-1), T_C^k = Tk, W row r = EK row answer_columns[r]
///   layerwise: B, A, C, TA, TC, W
class MemN2NParams {
 public:
  struct Storage {
    std::string name;
    Matrix value;
  };

  MemN2NParams() = default;
  /// Zero-filled parameters with the storage layout implied by the config.
  /// answer_columns maps each answer label to its vocabulary row (used by the
  /// adjacent W view; required to have answer_size entries < vocab_size).
  MemN2NParams(const ModelConfig& config, std::vector<std::uint32_t> answer_columns);

  const ModelConfig& config() const { return config_; }
  ModelConfig& config() { return config_; }
  const std::vector<std::uint32_t>& answer_columns() const { return answer_columns_; }

  std::vector<Storage>& storages() { return storages_; }
  const std::vector<Storage>& storages() const { return storages_; }

  // Storage index for each logical role; hop is 0-based.
  std::size_t question_storage() const { return 0; }
  std::size_t input_storage(std::size_t hop) const;
  std::size_t output_storage(std::size_t hop) const;
  std::size_t input_time_storage(std::size_t hop) const;
  std::size_t output_time_storage(std::size_t hop) const;
  /// Storage backing W; for adjacent tying this is the last output embedding.
  std::size_t answer_storage() const;
  bool answer_is_tied() const { return config_.tying == Tying::adjacent; }
  /// Row of the storage that holds W row r.
  std::size_t answer_row_index(std::size_t r) const {
    return answer_is_tied() ? answer_columns_[r] : r;
  }

  Matrix& B() { return storages_[question_storage()].value; }
  const Matrix& B() const { return storages_[question_storage()].value; }
  Matrix& A(std::size_t hop) { return storages_[input_storage(hop)].value; }
  const Matrix& A(std::size_t hop) const { return storages_[input_storage(hop)].value; }
  Matrix& C(std::size_t hop) { return storages_[output_storage(hop)].value; }
  const Matrix& C(std::size_t hop) const { return storages_[output_storage(hop)].value; }
  Matrix& TA(std::size_t hop) { return storages_[input_time_storage(hop)].value; }
  const Matrix& TA(std::size_t hop) const { return storages_[input_time_storage(hop)].value; }
  Matrix& TC(std::size_t hop) { return storages_[output_time_storage(hop)].value; }
  const Matrix& TC(std::size_t hop) const { return storages_[output_time_storage(hop)].value; }
  std::span<double> W_row(std::size_t r) {
    return storages_[answer_storage()].value.row(answer_row_index(r));
  }
  std::span<const double> W_row(std::size_t r) const {
    return storages_[answer_storage()].value.row(answer_row_index(r));
  }

  /// Logical role name -> storage name (e.g. "A2" -> "E1", "W" -> "E3^T").
  std::vector<std::pair<std::string, std::string>> role_table() const;

  /// True if the storages hold embeddings (token rows).
  bool is_embedding_storage(std::size_t s) const;

  /// Zeroes the NULL-token row of every embedding storage.
  void zero_null_embeddings();

  bool all_finite() const;

  std::size_t parameter_count() const;

 private:
  ModelConfig config_;
  std::vector<std::uint32_t> answer_columns_;
  std::vector<Storage> storages_;
};

/// Gaussian(0, sigma^2) initialization in storage order. With a pretrained
/// d x |V| matrix, A^1 and B are overwritten from it.
MemN2NParams init_params(const ModelConfig& config, std::vector<std::uint32_t> answer_columns,
                         std::mt19937_64& rng, const Matrix* pretrained = nullptr,
                         double sigma = 0.1);

/// Input to forward: context bags in dialog order plus the question bag.
struct EncodedSample {
  std::vector<BagOfWords> context;
  BagOfWords question;
  std::optional<std::uint32_t> gold;  // absent when the label is unanswerable
  std::optional<std::size_t> supporting_fact;
};

EncodedSample encode_sample(const QASample& sample, const Vocabulary& vocab,
                            const AnswerVocabulary& answers);

/// Memory vectors for one hop, row i = memory i (0 = most recent utterance).
struct MemoryEncoding {
  Matrix m;
  Matrix c;
};

/// Encodes at most memory_capacity of the most recent utterances.
MemoryEncoding encode_context(const MemN2NParams& params, std::span<const BagOfWords> context,
                              std::size_t hop);

/// p = softmax(u . m_i), or the raw scores when `linear`.
std::vector<double> attention(std::span<const double> u, const Matrix& memories, bool linear);

struct HopResult {
  std::vector<double> u_next;
  std::vector<double> o;
  std::vector<double> p;
};

HopResult hop(std::span<const double> u, const MemoryEncoding& memory, bool linear);

struct AttentionTrace {
  // Per hop. p[k][i] refers to memory i, i = 0 being the latest utterance.
  std::vector<std::vector<double>> p;
  std::vector<std::vector<double>> u;  // u^1..u^K (input of each hop)
  std::vector<std::vector<double>> o;
  std::vector<double> logits;
  std::vector<double> answer;
  std::size_t memories = 0;
  std::size_t dropped = 0;  // oldest utterances beyond capacity

  /// Memory index for a 1-based dialog-order position, if it was kept.
  std::optional<std::size_t> memory_of_position(std::size_t position, std::size_t context_size) const;
};

struct ForwardResult {
  std::vector<double> answer;
  AttentionTrace trace;
};

ForwardResult forward(const MemN2NParams& params, std::span<const BagOfWords> context,
                      const BagOfWords& question);

/// Argmax of the answer distribution, lowest index on ties.
std::uint32_t argmax_label(std::span<const double> distribution);

std::uint32_t predict(const MemN2NParams& params, const EncodedSample& sample);

std::vector<double> softmax(std::span<const double> x);

// ---------------------------------------------------------------------------
// Persistence

struct ModelBundle {
  MemN2NParams params;
  Vocabulary vocab;
  AnswerVocabulary answers;
};

inline constexpr std::uint32_t kContainerVersion = 1;

void save_params(const ModelBundle& bundle, std::ostream& out);
void save_params(const ModelBundle& bundle, const std::string& path);
ModelBundle load_params(std::istream& in);
ModelBundle load_params(const std::string& path);

}  // namespace mrdt
