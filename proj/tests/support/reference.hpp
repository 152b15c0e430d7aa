// Copyright (c) 2026 The dialog-reader Authors
// SPDX-License-Identifier: Apache-2.0
//
// Independent forward evaluation for tests. Logical matrices are rebuilt from
// storage *names* using the tying definitions, in the textbook orientation
// (embeddings d x |V|), and the model equations are evaluated with plain
// loops.

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrdt/model.hpp"

namespace ref {

using Mat = std::vector<std::vector<double>>;

struct Logical {
  Mat B;                 // d x V
  std::vector<Mat> A, C;  // per hop, d x V
  std::vector<Mat> TA, TC;  // per hop, M x d
  Mat W;                 // answers x d
};

inline const mrdt::Matrix& storage(const mrdt::MemN2NParams& p, const std::string& name) {
  for (const auto& s : p.storages())
    if (s.name == name) return s.value;
  throw std::runtime_error("no storage " + name);
}

// Token-major |V| x d storage -> d x |V|.
inline Mat embedding(const mrdt::Matrix& m) {
  Mat out(m.cols(), std::vector<double>(m.rows()));
  for (std::size_t v = 0; v < m.rows(); ++v)
    for (std::size_t j = 0; j < m.cols(); ++j) out[j][v] = m(v, j);
  return out;
}

inline Mat plain(const mrdt::Matrix& m) {
  Mat out(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

inline Logical logical(const mrdt::MemN2NParams& p) {
  const auto& cfg = p.config();
  const std::size_t K = cfg.hops;
  Logical L;
  L.B = embedding(storage(p, "B"));
  for (std::size_t k = 1; k <= K; ++k) {
    if (cfg.tying == mrdt::Tying::adjacent) {
      // A^k = C^{k-1} with A^1 its own matrix: storage E(k-1) feeds A^k, Ek feeds C^k.
      L.A.push_back(embedding(storage(p, "E" + std::to_string(k - 1))));
      L.C.push_back(embedding(storage(p, "E" + std::to_string(k))));
      L.TA.push_back(plain(storage(p, "T" + std::to_string(k - 1))));
      L.TC.push_back(plain(storage(p, "T" + std::to_string(k))));
    } else {
      L.A.push_back(embedding(storage(p, "A")));
      L.C.push_back(embedding(storage(p, "C")));
      L.TA.push_back(plain(storage(p, "TA")));
      L.TC.push_back(plain(storage(p, "TC")));
    }
  }
  if (cfg.tying == mrdt::Tying::adjacent) {
    // W = (C^K)^T restricted to the answer tokens.
    const auto& CK = L.C.back();
    for (auto col : p.answer_columns()) {
      std::vector<double> row(cfg.dim);
      for (std::size_t j = 0; j < cfg.dim; ++j) row[j] = CK[j][col];
      L.W.push_back(row);
    }
  } else {
    L.W = plain(storage(p, "W"));
  }
  return L;
}

using Bag = std::vector<double>;  // dense counts over V

inline std::vector<double> times(const Mat& M, const Bag& x) {
  std::vector<double> out(M.size(), 0.0);
  for (std::size_t r = 0; r < M.size(); ++r)
    for (std::size_t c = 0; c < x.size(); ++c) out[r] += M[r][c] * x[c];
  return out;
}

inline std::vector<double> softmax(const std::vector<double>& z) {
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  double sum = 0.0;
  std::vector<double> e(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) sum += e[i] = std::exp(z[i] - mx);
  for (auto& v : e) v /= sum;
  return e;
}

struct Result {
  std::vector<double> answer;
  std::vector<std::vector<double>> p;  // per hop, memory order (0 = latest)
};

/// `context` in dialog order; memory i is the (i+1)-th most recent utterance.
inline Result forward(const Logical& L, const std::vector<Bag>& context, const Bag& question,
                      std::size_t capacity, bool linear) {
  const std::size_t n = std::min(context.size(), capacity);
  auto u = times(L.B, question);
  const std::size_t d = u.size();
  Result res;
  for (std::size_t k = 0; k < L.A.size(); ++k) {
    std::vector<std::vector<double>> m(n), c(n);
    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Bag& x = context[context.size() - 1 - i];
      m[i] = times(L.A[k], x);
      c[i] = times(L.C[k], x);
      for (std::size_t j = 0; j < d; ++j) {
        m[i][j] += L.TA[k][i][j];
        c[i][j] += L.TC[k][i][j];
      }
      score[i] = 0.0;
      for (std::size_t j = 0; j < d; ++j) score[i] += u[j] * m[i][j];
    }
    auto p = linear ? score : softmax(score);
    std::vector<double> o(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) o[j] += p[i] * c[i][j];
    for (std::size_t j = 0; j < d; ++j) u[j] += o[j];
    res.p.push_back(p);
  }
  std::vector<double> logits(L.W.size(), 0.0);
  for (std::size_t r = 0; r < L.W.size(); ++r)
    for (std::size_t j = 0; j < d; ++j) logits[r] += L.W[r][j] * u[j];
  res.answer = softmax(logits);
  return res;
}

inline Bag dense(const mrdt::BagOfWords& b) {
  Bag out(b.dimension, 0.0);
  for (auto [idx, cnt] : b.counts) out[idx] = cnt;
  return out;
}

}  // namespace ref
