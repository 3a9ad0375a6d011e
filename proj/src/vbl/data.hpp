/*
 * Copyright 2026 The vbilstm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "vbl/tensor.hpp"

namespace vbl {

enum class Modality { kDiscrete, kBinary, kContinuous };

std::string_view modality_name(Modality m);
Modality parse_modality(std::string_view s);

/// Character vocabulary. Index 0 is reserved: it is the start token fed
/// before the first character and the symbol unseen characters map to.
class Vocab {
 public:
  static constexpr std::size_t kReserved = 0;
  static constexpr std::string_view kReservedSymbol = "<s>";

  Vocab();
  /// Builds from symbols in first-seen order.
  static Vocab from_symbols(const std::vector<std::string>& symbols);

  std::size_t size() const noexcept { return symbols_.size(); }
  std::size_t index(const std::string& symbol) const;  // kReserved when unseen
  bool contains(const std::string& symbol) const { return lookup_.count(symbol) != 0; }
  const std::string& symbol(std::size_t index) const;
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }

  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.symbols_ == b.symbols_; }

 private:
  void add(const std::string& symbol);

  std::vector<std::string> symbols_;
  std::map<std::string, std::size_t> lookup_;
};

/// Splits UTF-8 text into one string per code point.
std::vector<std::string> utf8_split(std::string_view text);

/// Right-padded batch of sequences. `data` is [batch x T x dim]; discrete
/// data stores token indices in a single channel.
struct SequenceBatch {
  Modality modality = Modality::kDiscrete;
  Tensor data;
  std::vector<std::size_t> lengths;
  std::vector<std::uint64_t> ids;  // noise identity of each sequence
  std::size_t vocab_size = 0;      // discrete only

  std::size_t size() const noexcept { return lengths.size(); }
  std::size_t max_len() const { return data.rank() == 3 ? data.shape()[1] : 0; }
  std::size_t dim() const { return data.rank() == 3 ? data.shape()[2] : 0; }
  std::size_t token_count() const;

  double value(std::size_t b, std::size_t t, std::size_t k) const {
    return data[(b * max_len() + t) * dim() + k];
  }
  std::size_t token(std::size_t b, std::size_t t) const {
    return static_cast<std::size_t>(value(b, t, 0));
  }

  /// Rows `rows` in the given order, with T trimmed to their longest length.
  SequenceBatch subset(const std::vector<std::size_t>& rows) const;
  /// Contiguous rows [begin, end).
  SequenceBatch slice(std::size_t begin, std::size_t end) const;
  /// Splits sequences longer than `window` into independent pieces.
  SequenceBatch split_long(std::size_t window) const;
  /// Checks lengths, index ranges and binary values.
  void validate() const;
};

/// Builds a batch from per-sequence frame lists (each frame has `dim` values).
SequenceBatch make_batch(Modality modality, std::size_t dim,
                         const std::vector<std::vector<double>>& sequences,
                         std::size_t vocab_size = 0);

struct SplitFractions {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

struct DataSplits {
  SequenceBatch train, valid, test;
};

/// Contiguous split by sequence counts: floor(f*n) for train and valid, the
/// remainder for test.
DataSplits split_batch(const SequenceBatch& all, const SplitFractions& f);

struct CharCorpus {
  Vocab vocab;
  DataSplits splits;
};

/// Chunks `text` into sequences of `chunk` characters (the last may be
/// shorter), splits them, and builds the vocabulary from the train chunks.
CharCorpus make_char_corpus(std::string_view text, const SplitFractions& f,
                            std::size_t chunk = 128);
CharCorpus load_char_corpus(const std::filesystem::path& path, const SplitFractions& f,
                            std::size_t chunk = 128);
/// Encodes text with an existing vocabulary (for evaluating a checkpoint).
SequenceBatch encode_text(std::string_view text, const Vocab& vocab, std::size_t chunk);

// Binary sequence files:
//   bytes 0-3  "VBLB"
//   bytes 4-7  u32 LE encoding: 0 = one byte per value, 1 = packed bits (MSB first)
//   bytes 8-31 u64 LE n_seq, T, d
//   body: n_seq*T*d values in row-major order
enum class BitEncoding : std::uint32_t { kBytes = 0, kPacked = 1 };
SequenceBatch load_binary_sequences(const std::filesystem::path& path);
void save_binary_sequences(const std::filesystem::path& path, const SequenceBatch& batch,
                           BitEncoding encoding);

// Frame files:
//   bytes 0-3  "VBLF"
//   bytes 4-7  u32 LE version (1)
//   bytes 8-31 u64 LE n_seq, T, d
//   body: n_seq*T*d f64 LE values in row-major order
SequenceBatch load_frame_sequences(const std::filesystem::path& path);
void save_frame_sequences(const std::filesystem::path& path, const SequenceBatch& batch);

/// Per-dimension standardization fitted on unpadded frames of one batch.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Standardizer fit(const SequenceBatch& batch);
  void apply(SequenceBatch& batch) const;
};

/// Deterministic toy corpus: consecutive runs of `period` symbols over an
/// `alphabet`-symbol alphabet (run k starts at symbol k*period mod alphabet).
/// `seed` permutes which letters play which role.
std::string synth_repetition_text(std::size_t n_chars, std::size_t alphabet = 8,
                                  std::size_t period = 4, std::uint64_t seed = 0);
/// Gaussian random-walk frames (continuous modality).
SequenceBatch synth_random_walk(std::size_t n_seq, std::size_t len, std::size_t dim,
                                std::uint64_t seed);
/// Binary frames that shift a single active bit one position per step.
SequenceBatch synth_shift_bits(std::size_t n_seq, std::size_t len, std::size_t dim,
                               std::uint64_t seed);

// Metrics.
double bits_per_character(double nll_nats_per_char);
double word_perplexity(double nll_nats_total, std::size_t n_words);

}  // namespace vbl
