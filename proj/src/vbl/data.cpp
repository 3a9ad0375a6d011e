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

#include "vbl/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vbl/errors.hpp"
#include "vbl/rng.hpp"

namespace vbl {

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::kDiscrete: return "discrete";
    case Modality::kBinary: return "binary";
    case Modality::kContinuous: return "continuous";
  }
  return "unknown";
}

Modality parse_modality(std::string_view s) {
  if (s == "discrete") return Modality::kDiscrete;
  if (s == "binary") return Modality::kBinary;
  if (s == "continuous") return Modality::kContinuous;
  throw DataError("unknown modality '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Vocab

Vocab::Vocab() { add(std::string(kReservedSymbol)); }

Vocab Vocab::from_symbols(const std::vector<std::string>& symbols) {
  Vocab v;
  for (const auto& s : symbols)
    if (!v.contains(s)) v.add(s);
  return v;
}

void Vocab::add(const std::string& symbol) {
  lookup_.emplace(symbol, symbols_.size());
  symbols_.push_back(symbol);
}

std::size_t Vocab::index(const std::string& symbol) const {
  auto it = lookup_.find(symbol);
  return it == lookup_.end() ? kReserved : it->second;
}

const std::string& Vocab::symbol(std::size_t index) const {
  if (index >= symbols_.size()) throw DataError("vocab index out of range");
  return symbols_[index];
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocab file " + path.string());
  out << nlohmann::json(symbols_).dump() << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read vocab file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed vocab file: " + std::string(e.what()));
  }
  auto symbols = j.get<std::vector<std::string>>();
  if (symbols.empty() || symbols[0] != kReservedSymbol)
    throw DataError("vocab file does not start with the reserved symbol");
  Vocab v;
  for (std::size_t i = 1; i < symbols.size(); ++i) {
    if (v.contains(symbols[i])) throw DataError("duplicate vocab symbol");
    v.add(symbols[i]);
  }
  return v;
}

std::vector<std::string> utf8_split(std::string_view text) {
  std::vector<std::string> out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (c >= 0xF0) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    else if (c >= 0x80) throw DataError("invalid UTF-8 at byte " + std::to_string(i));
    if (i + len > text.size()) throw DataError("truncated UTF-8 sequence at end of text");
    for (std::size_t k = 1; k < len; ++k)
      if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80)
        throw DataError("invalid UTF-8 at byte " + std::to_string(i + k));
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

// ---------------------------------------------------------------------------
// SequenceBatch

std::size_t SequenceBatch::token_count() const {
  return std::accumulate(lengths.begin(), lengths.end(), std::size_t{0});
}

SequenceBatch SequenceBatch::subset(const std::vector<std::size_t>& rows) const {
  const std::size_t T = max_len(), d = dim();
  std::size_t new_t = 0;
  for (std::size_t r : rows) {
    if (r >= size()) throw DataError("batch row out of range");
    new_t = std::max(new_t, lengths[r]);
  }
  SequenceBatch out;
  out.modality = modality;
  out.vocab_size = vocab_size;
  out.data = Tensor(Shape{rows.size(), new_t, d}, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    out.lengths.push_back(lengths[r]);
    out.ids.push_back(ids[r]);
    for (std::size_t t = 0; t < new_t; ++t)
      for (std::size_t k = 0; k < d; ++k)
        out.data[(i * new_t + t) * d + k] = data[(r * T + t) * d + k];
  }
  return out;
}

SequenceBatch SequenceBatch::slice(std::size_t begin, std::size_t end) const {
  std::vector<std::size_t> rows(end - begin);
  std::iota(rows.begin(), rows.end(), begin);
  return subset(rows);
}

SequenceBatch SequenceBatch::split_long(std::size_t window) const {
  if (window == 0) throw DataError("split window must be positive");
  if (max_len() <= window) return *this;
  const std::size_t d = dim();
  std::vector<std::vector<double>> pieces;
  std::vector<std::uint64_t> piece_ids;
  for (std::size_t b = 0; b < size(); ++b) {
    for (std::size_t start = 0, part = 0; start < lengths[b]; start += window, ++part) {
      const std::size_t len = std::min(window, lengths[b] - start);
      std::vector<double> frames(len * d);
      for (std::size_t t = 0; t < len; ++t)
        for (std::size_t k = 0; k < d; ++k) frames[t * d + k] = value(b, start + t, k);
      pieces.push_back(std::move(frames));
      piece_ids.push_back(part == 0 ? ids[b] : mix_seed(ids[b], part));
    }
  }
  SequenceBatch out = make_batch(modality, d, pieces, vocab_size);
  out.ids = std::move(piece_ids);
  return out;
}

void SequenceBatch::validate() const {
  if (data.rank() != 3) throw DataError("batch data must be [batch x T x dim]");
  if (data.shape()[0] != lengths.size() || ids.size() != lengths.size())
    throw DataError("batch length/id vectors do not match the batch size");
  for (std::size_t b = 0; b < size(); ++b) {
    if (lengths[b] > max_len()) throw DataError("sequence length exceeds T");
    for (std::size_t t = 0; t < lengths[b]; ++t)
      for (std::size_t k = 0; k < dim(); ++k) {
        const double v = value(b, t, k);
        if (!std::isfinite(v)) throw DataError("non-finite value in batch");
        if (modality == Modality::kDiscrete &&
            (v < 0 || v != std::floor(v) || static_cast<std::size_t>(v) >= vocab_size))
          throw DataError("token index out of vocabulary range");
        if (modality == Modality::kBinary && v != 0.0 && v != 1.0)
          throw DataError("binary batch holds a value other than 0/1");
      }
  }
  if (modality == Modality::kDiscrete && dim() != 1)
    throw DataError("discrete batches hold one index per step");
}

SequenceBatch make_batch(Modality modality, std::size_t dim,
                         const std::vector<std::vector<double>>& sequences,
                         std::size_t vocab_size) {
  if (dim == 0) throw DataError("frame dimension must be positive");
  std::size_t T = 0;
  for (const auto& s : sequences) {
    if (s.size() % dim != 0) throw DataError("sequence size is not a multiple of the frame dim");
    T = std::max(T, s.size() / dim);
  }
  SequenceBatch out;
  out.modality = modality;
  out.vocab_size = vocab_size;
  out.data = Tensor(Shape{sequences.size(), T, dim}, 0.0);
  for (std::size_t b = 0; b < sequences.size(); ++b) {
    const auto& s = sequences[b];
    std::copy(s.begin(), s.end(),
              out.data.data().begin() + static_cast<std::ptrdiff_t>(b * T * dim));
    out.lengths.push_back(s.size() / dim);
    out.ids.push_back(b);
  }
  return out;
}

DataSplits split_batch(const SequenceBatch& all, const SplitFractions& f) {
  if (f.train < 0 || f.valid < 0 || f.test < 0 ||
      std::abs(f.train + f.valid + f.test - 1.0) > 1e-9)
    throw DataError("split fractions must be non-negative and sum to 1");
  const std::size_t n = all.size();
  const auto count = [n](double frac) {
    return static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 1e-9));
  };
  const std::size_t n_train = count(f.train);
  const std::size_t n_valid = std::min(count(f.valid), n - n_train);
  return DataSplits{all.slice(0, n_train), all.slice(n_train, n_train + n_valid),
                    all.slice(n_train + n_valid, n)};
}

// ---------------------------------------------------------------------------
// Character corpora

namespace {

std::vector<std::vector<std::string>> chunk_symbols(const std::vector<std::string>& chars,
                                                    std::size_t chunk) {
  std::vector<std::vector<std::string>> out;
  for (std::size_t i = 0; i < chars.size(); i += chunk)
    out.emplace_back(chars.begin() + static_cast<std::ptrdiff_t>(i),
                     chars.begin() + static_cast<std::ptrdiff_t>(std::min(chars.size(), i + chunk)));
  return out;
}

SequenceBatch encode_chunks(const std::vector<std::vector<std::string>>& chunks,
                            const Vocab& vocab, std::size_t first_id) {
  std::vector<std::vector<double>> seqs;
  seqs.reserve(chunks.size());
  for (const auto& c : chunks) {
    std::vector<double> s;
    s.reserve(c.size());
    for (const auto& sym : c) s.push_back(static_cast<double>(vocab.index(sym)));
    seqs.push_back(std::move(s));
  }
  SequenceBatch b = make_batch(Modality::kDiscrete, 1, seqs, vocab.size());
  for (auto& id : b.ids) id += first_id;
  return b;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

CharCorpus make_char_corpus(std::string_view text, const SplitFractions& f, std::size_t chunk) {
  if (chunk == 0) throw DataError("chunk length must be positive");
  const auto chars = utf8_split(text);
  if (chars.empty()) throw DataError("empty text corpus");
  const auto chunks = chunk_symbols(chars, chunk);

  // Split on chunk counts first so the vocabulary only sees train text.
  SequenceBatch placeholder = make_batch(Modality::kDiscrete, 1,
      std::vector<std::vector<double>>(chunks.size(), std::vector<double>{0.0}), 1);
  const DataSplits counts = split_batch(placeholder, f);
  const std::size_t n_train = counts.train.size(), n_valid = counts.valid.size();

  std::vector<std::string> train_symbols;
  for (std::size_t i = 0; i < n_train; ++i)
    train_symbols.insert(train_symbols.end(), chunks[i].begin(), chunks[i].end());
  CharCorpus out;
  out.vocab = Vocab::from_symbols(train_symbols);

  const auto part = [&](std::size_t b, std::size_t e) {
    return encode_chunks({chunks.begin() + static_cast<std::ptrdiff_t>(b),
                          chunks.begin() + static_cast<std::ptrdiff_t>(e)},
                         out.vocab, b);
  };
  out.splits.train = part(0, n_train);
  out.splits.valid = part(n_train, n_train + n_valid);
  out.splits.test = part(n_train + n_valid, chunks.size());
  return out;
}

CharCorpus load_char_corpus(const std::filesystem::path& path, const SplitFractions& f,
                            std::size_t chunk) {
  return make_char_corpus(read_file(path), f, chunk);
}

SequenceBatch encode_text(std::string_view text, const Vocab& vocab, std::size_t chunk) {
  if (chunk == 0) throw DataError("chunk length must be positive");
  const auto chars = utf8_split(text);
  return encode_chunks(chunk_symbols(chars, chunk), vocab, 0);
}

// ---------------------------------------------------------------------------
// Binary / frame files

namespace {

constexpr std::size_t kHeaderBytes = 32;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
std::uint64_t get_le(const std::string& in, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

struct Header {
  std::uint32_t word = 0;
  std::uint64_t n = 0, T = 0, d = 0;
};

Header parse_header(const std::string& bytes, std::string_view magic) {
  if (bytes.size() < kHeaderBytes || bytes.compare(0, 4, magic) != 0)
    throw DataError("malformed header: expected magic '" + std::string(magic) + "'");
  Header h;
  h.word = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
  h.n = get_le(bytes, 8, 8);
  h.T = get_le(bytes, 16, 8);
  h.d = get_le(bytes, 24, 8);
  if (h.d == 0) throw DataError("malformed header: zero frame dimension");
  constexpr std::uint64_t kLimit = 1ULL << 40;
  if (h.n > kLimit || h.T > kLimit || h.d > kLimit || h.n * h.T > kLimit / h.d)
    throw DataError("malformed header: declared size too large");
  return h;
}

std::string header_bytes(std::string_view magic, std::uint32_t word, const SequenceBatch& b) {
  std::string out(magic);
  put_u32(out, word);
  put_u64(out, b.size());
  put_u64(out, b.max_len());
  put_u64(out, b.dim());
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

SequenceBatch full_batch(Modality m, const Header& h) {
  SequenceBatch b;
  b.modality = m;
  b.data = Tensor(Shape{h.n, h.T, h.d}, 0.0);
  b.lengths.assign(h.n, h.T);
  b.ids.resize(h.n);
  std::iota(b.ids.begin(), b.ids.end(), 0);
  return b;
}

}  // namespace

SequenceBatch load_binary_sequences(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const Header h = parse_header(bytes, "VBLB");
  const std::uint64_t count = h.n * h.T * h.d;
  SequenceBatch b = full_batch(Modality::kBinary, h);
  const std::string_view body(bytes.data() + kHeaderBytes, bytes.size() - kHeaderBytes);
  if (h.word == static_cast<std::uint32_t>(BitEncoding::kBytes)) {
    if (body.size() != count) throw DataError("binary body size does not match header");
    for (std::size_t i = 0; i < count; ++i) {
      const auto v = static_cast<unsigned char>(body[i]);
      if (v > 1) throw DataError("binary body holds a byte other than 0/1");
      b.data[i] = v;
    }
  } else if (h.word == static_cast<std::uint32_t>(BitEncoding::kPacked)) {
    if (body.size() != (count + 7) / 8) throw DataError("packed body size does not match header");
    for (std::size_t i = 0; i < count; ++i)
      b.data[i] = (static_cast<unsigned char>(body[i / 8]) >> (7 - i % 8)) & 1u;
  } else {
    throw DataError("malformed header: unknown bit encoding");
  }
  return b;
}

void save_binary_sequences(const std::filesystem::path& path, const SequenceBatch& batch,
                           BitEncoding encoding) {
  std::string out = header_bytes("VBLB", static_cast<std::uint32_t>(encoding), batch);
  const auto values = batch.data.data();
  if (encoding == BitEncoding::kBytes) {
    for (double v : values) out.push_back(v != 0.0 ? 1 : 0);
  } else {
    std::string packed((values.size() + 7) / 8, '\0');
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i] != 0.0) packed[i / 8] = static_cast<char>(packed[i / 8] | (0x80 >> (i % 8)));
    out += packed;
  }
  write_file(path, out);
}

SequenceBatch load_frame_sequences(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const Header h = parse_header(bytes, "VBLF");
  if (h.word != 1) throw DataError("malformed header: unsupported frame file version");
  const std::uint64_t count = h.n * h.T * h.d;
  if (bytes.size() - kHeaderBytes != count * 8) throw DataError("frame body size does not match header");
  SequenceBatch b = full_batch(Modality::kContinuous, h);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t bits = get_le(bytes, kHeaderBytes + 8 * i, 8);
    double v;
    static_assert(sizeof(v) == sizeof(bits));
    std::memcpy(&v, &bits, sizeof(v));
    if (!std::isfinite(v)) throw DataError("non-finite value in frame file");
    b.data[i] = v;
  }
  return b;
}

void save_frame_sequences(const std::filesystem::path& path, const SequenceBatch& batch) {
  std::string out = header_bytes("VBLF", 1, batch);
  for (double v : batch.data.data()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(v));
    put_u64(out, bits);
  }
  write_file(path, out);
}

Standardizer Standardizer::fit(const SequenceBatch& batch) {
  const std::size_t d = batch.dim();
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.stddev.assign(d, 1.0);
  const std::size_t n = batch.token_count();
  if (n == 0) return s;
  std::vector<double> sq(d, 0.0);
  for (std::size_t b = 0; b < batch.size(); ++b)
    for (std::size_t t = 0; t < batch.lengths[b]; ++t)
      for (std::size_t k = 0; k < d; ++k) s.mean[k] += batch.value(b, t, k);
  for (double& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t b = 0; b < batch.size(); ++b)
    for (std::size_t t = 0; t < batch.lengths[b]; ++t)
      for (std::size_t k = 0; k < d; ++k) {
        const double c = batch.value(b, t, k) - s.mean[k];
        sq[k] += c * c;
      }
  for (std::size_t k = 0; k < d; ++k) {
    const double sd = std::sqrt(sq[k] / static_cast<double>(n));
    s.stddev[k] = sd > 0 ? sd : 1.0;
  }
  return s;
}

void Standardizer::apply(SequenceBatch& batch) const {
  const std::size_t d = batch.dim();
  if (d != mean.size()) throw ShapeError("standardizer dimension mismatch");
  const std::size_t T = batch.max_len();
  for (std::size_t b = 0; b < batch.size(); ++b)
    for (std::size_t t = 0; t < batch.lengths[b]; ++t)
      for (std::size_t k = 0; k < d; ++k) {
        double& v = batch.data[(b * T + t) * d + k];
        v = (v - mean[k]) / stddev[k];
      }
}

// ---------------------------------------------------------------------------
// Synthetic corpora

std::string synth_repetition_text(std::size_t n_chars, std::size_t alphabet, std::size_t period,
                                  std::uint64_t seed) {
  if (alphabet == 0 || alphabet > 26 || period == 0)
    throw DataError("synthetic corpus needs 1..26 symbols and a positive period");
  std::string letters;
  for (std::size_t i = 0; i < alphabet; ++i) letters.push_back(static_cast<char>('a' + i));
  if (seed != 0) {
    SplitMix64 g(seed);
    std::shuffle(letters.begin(), letters.end(), g);
  }
  std::string out;
  out.reserve(n_chars);
  for (std::size_t i = 0; i < n_chars; ++i) {
    const std::size_t run = i / period;
    out.push_back(letters[(run * period + i % period) % alphabet]);
  }
  return out;
}

SequenceBatch synth_random_walk(std::size_t n_seq, std::size_t len, std::size_t dim,
                                std::uint64_t seed) {
  std::vector<std::vector<double>> seqs(n_seq, std::vector<double>(len * dim));
  for (std::size_t s = 0; s < n_seq; ++s) {
    SplitMix64 g(mix_seed(seed, s));
    std::normal_distribution<double> step(0.0, 0.1);
    std::vector<double> pos(dim, 0.0);
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t k = 0; k < dim; ++k) {
        pos[k] = 0.9 * pos[k] + step(g);
        seqs[s][t * dim + k] = pos[k];
      }
  }
  return make_batch(Modality::kContinuous, dim, seqs);
}

SequenceBatch synth_shift_bits(std::size_t n_seq, std::size_t len, std::size_t dim,
                               std::uint64_t seed) {
  std::vector<std::vector<double>> seqs(n_seq, std::vector<double>(len * dim, 0.0));
  for (std::size_t s = 0; s < n_seq; ++s) {
    SplitMix64 g(mix_seed(seed, s));
    std::size_t pos = static_cast<std::size_t>(g() % dim);
    for (std::size_t t = 0; t < len; ++t) {
      seqs[s][t * dim + pos] = 1.0;
      pos = (pos + 1) % dim;
    }
  }
  return make_batch(Modality::kBinary, dim, seqs);
}

// ---------------------------------------------------------------------------
// Metrics

double bits_per_character(double nll_nats_per_char) {
  if (nll_nats_per_char < 0) throw DomainError("negative NLL");
  return nll_nats_per_char / std::log(2.0);
}

double word_perplexity(double nll_nats_total, std::size_t n_words) {
  if (n_words == 0) throw DomainError("perplexity needs at least one word");
  return std::exp(nll_nats_total / static_cast<double>(n_words));
}

}  // namespace vbl
