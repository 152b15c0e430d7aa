// Copyright (c) 2026 The dialog-reader Authors
// SPDX-License-Identifier: Apache-2.0
//
// Model container: "MRDT", u32 version, config, vocabularies, answer column
// map, role table, then named matrices (name, rows, cols, row-major f64).
// All integers and floats are little-endian.

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "mrdt/error.hpp"
#include "mrdt/model.hpp"

namespace mrdt {

namespace {

constexpr char kMagic[4] = {'M', 'R', 'D', 'T'};
constexpr std::uint64_t kMaxStringLength = 1u << 20;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  void le(std::uint64_t v, int bytes) {
    char buf[8];
    for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(buf, bytes);
  }
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void context(std::string what) { what_ = std::move(what); }

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string str() {
    auto n = u32();
    if (n > kMaxStringLength) throw FormatError(fmt::format("corrupt string length while reading {}", what_));
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  void read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw FormatError(fmt::format("model container truncated while reading {}", what_));
  }

 private:
  std::uint64_t le(int bytes) {
    unsigned char buf[8];
    read(reinterpret_cast<char*>(buf), static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  std::istream& in_;
  std::string what_ = "header";
};

}  // namespace

void save_params(const ModelBundle& bundle, std::ostream& out) {
  const auto& params = bundle.params;
  const auto& cfg = params.config();
  Writer w(out);
  out.write(kMagic, 4);
  w.u32(kContainerVersion);
  w.u64(cfg.dim);
  w.u64(cfg.hops);
  w.u8(cfg.tying == Tying::adjacent ? 0 : 1);
  w.u64(cfg.memory_capacity);
  w.u64(cfg.answer_size);
  w.u64(cfg.vocab_size);
  w.u8(cfg.linear_attention ? 1 : 0);

  w.u64(bundle.vocab.size());
  for (const auto& t : bundle.vocab.tokens()) w.str(t);
  w.u64(bundle.answers.size());
  for (const auto& l : bundle.answers.labels()) w.str(l);
  w.u64(params.answer_columns().size());
  for (auto c : params.answer_columns()) w.u32(c);

  auto roles = params.role_table();
  w.u64(roles.size());
  for (const auto& [role, storage] : roles) {
    w.str(role);
    w.str(storage);
  }

  w.u64(params.storages().size());
  for (std::size_t s = 0; s < params.storages().size(); ++s) {
    const auto& st = params.storages()[s];
    // Embeddings are written in their logical d x |V| orientation.
    Matrix logical = params.is_embedding_storage(s) ? st.value.transposed() : st.value;
    w.str(st.name);
    w.u64(logical.rows());
    w.u64(logical.cols());
    for (double v : logical.values()) w.f64(v);
  }
  if (!out) throw IoError("failed writing model container");
}

void save_params(const ModelBundle& bundle, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write model container '{}'", path));
  save_params(bundle, out);
}

ModelBundle load_params(std::istream& in) {
  Reader r(in);
  char magic[4];
  r.context("magic bytes");
  r.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a model container (bad magic bytes)");
  r.context("format version");
  auto version = r.u32();
  if (version != kContainerVersion)
    throw FormatError(fmt::format("unsupported model container version {} (expected {})", version,
                                  kContainerVersion));

  r.context("model config");
  ModelConfig cfg;
  cfg.dim = r.u64();
  cfg.hops = r.u64();
  auto tying = r.u8();
  if (tying > 1) throw FormatError(fmt::format("unknown tying code {}", tying));
  cfg.tying = tying == 0 ? Tying::adjacent : Tying::layerwise;
  cfg.memory_capacity = r.u64();
  cfg.answer_size = r.u64();
  cfg.vocab_size = r.u64();
  cfg.linear_attention = r.u8() != 0;

  ModelBundle bundle;
  r.context("vocabulary");
  auto nvocab = r.u64();
  if (nvocab != cfg.vocab_size || nvocab < 2)
    throw FormatError(fmt::format("vocabulary listing has {} entries, config says {}", nvocab, cfg.vocab_size));
  for (std::uint64_t i = 0; i < nvocab; ++i) {
    auto tok = r.str();
    if (i >= 2 && bundle.vocab.add(tok) != i)
      throw FormatError(fmt::format("duplicate vocabulary token '{}'", tok));
  }
  r.context("answer vocabulary");
  auto nans = r.u64();
  if (nans != cfg.answer_size)
    throw FormatError(fmt::format("answer listing has {} entries, config says {}", nans, cfg.answer_size));
  for (std::uint64_t i = 0; i < nans; ++i) bundle.answers.add(r.str());

  r.context("answer column map");
  auto ncols = r.u64();
  if (ncols > nans) throw FormatError("answer column map longer than answer vocabulary");
  std::vector<std::uint32_t> columns(ncols);
  for (auto& c : columns) c = r.u32();

  try {
    bundle.params = MemN2NParams(cfg, std::move(columns));
  } catch (const InvalidArgument& e) {
    throw FormatError(fmt::format("inconsistent model container: {}", e.what()));
  }

  r.context("role table");
  auto nroles = r.u64();
  std::vector<std::pair<std::string, std::string>> roles;
  for (std::uint64_t i = 0; i < nroles && i < 4096; ++i) {
    auto role = r.str();
    auto storage = r.str();
    roles.emplace_back(std::move(role), std::move(storage));
  }
  if (roles != bundle.params.role_table())
    throw FormatError("role table does not match the tying scheme recorded in the config");

  r.context("matrix count");
  auto nmat = r.u64();
  auto& storages = bundle.params.storages();
  if (nmat != storages.size())
    throw FormatError(fmt::format("container holds {} matrices, expected {}", nmat, storages.size()));
  for (std::size_t s = 0; s < storages.size(); ++s) {
    r.context(fmt::format("matrix #{} header", s));
    auto name = r.str();
    if (name != storages[s].name)
      throw FormatError(fmt::format("expected matrix '{}', found '{}'", storages[s].name, name));
    auto rows = r.u64();
    auto cols = r.u64();
    bool emb = bundle.params.is_embedding_storage(s);
    const Matrix& target = storages[s].value;
    std::size_t want_rows = emb ? target.cols() : target.rows();
    std::size_t want_cols = emb ? target.rows() : target.cols();
    if (rows != want_rows || cols != want_cols)
      throw FormatError(fmt::format("matrix '{}' is {}x{}, expected {}x{}", name, rows, cols,
                                    want_rows, want_cols));
    r.context(fmt::format("matrix '{}'", name));
    Matrix logical(rows, cols);
    for (double& v : logical.values()) v = r.f64();
    storages[s].value = emb ? logical.transposed() : std::move(logical);
  }
  return bundle;
}

ModelBundle load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open model container '{}'", path));
  try {
    return load_params(in);
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path, e.what()));
  }
}

}  // namespace mrdt
