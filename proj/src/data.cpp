// Copyright 2026 The Laso Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "laso/data.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <utility>

#include "laso/error.h"

namespace laso {

namespace {

constexpr std::uint32_t kCorpusFormatVersion = 1;

const char* kReservedTokens[kNumReservedIds] = {"<eos>", "<sos>", "<unk>"};

double f32_quantize(double v) {
  return static_cast<double>(static_cast<float>(v));
}

std::string padded_index(int i, int width) {
  std::ostringstream s;
  s << std::setw(width) << std::setfill('0') << i;
  return s.str();
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
  if (static_cast<int>(tokens_.size()) < kNumReservedIds) {
    throw DataError("vocabulary: need at least the " +
                    std::to_string(kNumReservedIds) + " reserved tokens, got " +
                    std::to_string(tokens_.size()));
  }
  for (int i = 0; i < kNumReservedIds; ++i) {
    if (tokens_[i] != kReservedTokens[i]) {
      throw DataError("vocabulary: id " + std::to_string(i) + " must be " +
                      kReservedTokens[i] + ", got " + tokens_[i]);
    }
  }
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
    if (tokens_[i].empty()) {
      throw DataError("vocabulary: empty token at id " + std::to_string(i));
    }
    if (!index_.emplace(tokens_[i], i).second) {
      throw DataError("vocabulary: duplicate token " + tokens_[i]);
    }
  }
}

Vocabulary Vocabulary::make_default(int vocab_size) {
  if (vocab_size < kNumReservedIds + 1) {
    throw ConfigError("vocabulary: size must exceed the " +
                      std::to_string(kNumReservedIds) + " reserved ids, got " +
                      std::to_string(vocab_size));
  }
  std::vector<std::string> tokens;
  tokens.reserve(vocab_size);
  for (int i = 0; i < kNumReservedIds; ++i) tokens.push_back(kReservedTokens[i]);
  for (int i = 0; i < vocab_size - kNumReservedIds; ++i) {
    tokens.push_back("w" + padded_index(i, 2));
  }
  return Vocabulary(std::move(tokens));
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) {
    throw DataError("vocabulary: id " + std::to_string(id) + " outside [0, " +
                    std::to_string(size()) + ")");
  }
  return tokens_[id];
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return index_.count(token) != 0;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) {
    throw IoError("vocabulary save: cannot open " + path);
  }
  for (const std::string& t : tokens_) out << t << '\n';
  out.flush();
  if (!out) {
    throw IoError("vocabulary save: write failed for " + path);
  }
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("vocabulary load: cannot open " + path);
  }
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

void SyntheticSpec::validate() const {
  if (vocab_size < kNumReservedIds + 1) {
    throw ConfigError("synthetic spec: vocab_size must exceed the " +
                      std::to_string(kNumReservedIds) + " reserved ids");
  }
  if (d_feat < 1) {
    throw ConfigError("synthetic spec: d_feat must be positive");
  }
  int n_real = vocab_size - kNumReservedIds;
  if (transition.shape != std::vector<int>{n_real, n_real}) {
    throw ConfigError("synthetic spec: transition must be [" +
                      std::to_string(n_real) + ", " + std::to_string(n_real) +
                      "], got " + shape_str(transition.shape));
  }
  for (int r = 0; r < n_real; ++r) {
    double sum = 0.0;
    for (int c = 0; c < n_real; ++c) {
      double p = transition.at(r, c);
      if (p < 0.0) {
        throw ConfigError("synthetic spec: negative transition probability at row " +
                          std::to_string(r));
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ConfigError("synthetic spec: transition row " + std::to_string(r) +
                        " sums to " + std::to_string(sum));
    }
  }
  if (d_min < 1 || d_max < d_min) {
    throw ConfigError("synthetic spec: frame range [" + std::to_string(d_min) +
                      ", " + std::to_string(d_max) + "] is invalid");
  }
  if (noise_sigma < 0.0) {
    throw ConfigError("synthetic spec: noise_sigma must be >= 0");
  }
  if (n_utterances < 0) {
    throw ConfigError("synthetic spec: n_utterances must be >= 0");
  }
  if (len_min < 1 || len_max < len_min) {
    throw ConfigError("synthetic spec: length range [" +
                      std::to_string(len_min) + ", " + std::to_string(len_max) +
                      "] is invalid");
  }
  // Longest transcript plus <sos> and <eos> must fit the decode slots.
  if (len_max > max_len - 2) {
    throw ConfigError("synthetic spec: len_max " + std::to_string(len_max) +
                      " exceeds max_len " + std::to_string(max_len) +
                      " minus 2 special slots");
  }
}

SyntheticSpec SyntheticSpec::desk_default(int n_utterances,
                                          std::uint64_t seed) {
  SyntheticSpec spec;
  spec.transition = default_transition(spec.vocab_size - kNumReservedIds);
  spec.n_utterances = n_utterances;
  spec.seed = seed;
  return spec;
}

Tensor SyntheticSpec::default_transition(int n_real_tokens) {
  if (n_real_tokens < 1) {
    throw ConfigError("synthetic spec: need at least one real token");
  }
  // Each token has a few likely successors at fixed offsets, which gives
  // bigram statistics a language model can actually exploit.
  const int offsets[] = {1, 3, 7, 12};
  const double probs[] = {0.5, 0.25, 0.15, 0.10};
  Tensor t({n_real_tokens, n_real_tokens});
  for (int r = 0; r < n_real_tokens; ++r) {
    for (int k = 0; k < 4; ++k) {
      t.at(r, (r + offsets[k]) % n_real_tokens) += probs[k];
    }
  }
  return t;
}

std::vector<int> sample_transcript(const SyntheticSpec& spec, RngStream* rng) {
  int n_real = spec.vocab_size - kNumReservedIds;
  int len = rng->uniform_int(spec.len_min, spec.len_max);
  std::vector<int> tokens;
  tokens.reserve(len);
  int cur = rng->uniform_int(0, n_real - 1);
  tokens.push_back(kNumReservedIds + cur);
  for (int i = 1; i < len; ++i) {
    double u = rng->uniform();
    double cum = 0.0;
    int next = n_real - 1;  // fallthrough guard for cumulative rounding
    for (int c = 0; c < n_real; ++c) {
      cum += spec.transition.at(cur, c);
      if (u < cum) {
        next = c;
        break;
      }
    }
    cur = next;
    tokens.push_back(kNumReservedIds + cur);
  }
  return tokens;
}

Corpus generate_corpus(const SyntheticSpec& spec, int split,
                       const std::string& id_prefix) {
  spec.validate();
  if (split < 0) {
    throw ConfigError("generate_corpus: split must be >= 0");
  }
  int n_real = spec.vocab_size - kNumReservedIds;
  RngStream root(spec.seed);
  // Prototypes come from their own stream so they depend only on the seed,
  // not on how many utterances are drawn or which split this is. Splits of
  // the same seed therefore share acoustics but never utterances.
  RngStream proto_rng = root.fork(1);
  Tensor protos = Tensor::randn({n_real, spec.d_feat}, &proto_rng);
  RngStream text_rng = root.fork(2 + 2 * static_cast<std::uint64_t>(split));
  RngStream frame_rng = root.fork(3 + 2 * static_cast<std::uint64_t>(split));
  Corpus corpus;
  corpus.reserve(spec.n_utterances);
  for (int u = 0; u < spec.n_utterances; ++u) {
    Utterance utt;
    utt.id = id_prefix + padded_index(u, 5);
    utt.tokens = sample_transcript(spec, &text_rng);
    std::vector<int> durations(utt.tokens.size());
    int t0 = 0;
    for (std::size_t i = 0; i < utt.tokens.size(); ++i) {
      durations[i] = frame_rng.uniform_int(spec.d_min, spec.d_max);
      t0 += durations[i];
    }
    utt.features = Tensor({t0, spec.d_feat});
    int row = 0;
    for (std::size_t i = 0; i < utt.tokens.size(); ++i) {
      int proto = utt.tokens[i] - kNumReservedIds;
      for (int d = 0; d < durations[i]; ++d, ++row) {
        for (int f = 0; f < spec.d_feat; ++f) {
          double v = protos.at(proto, f) + spec.noise_sigma * frame_rng.normal();
          // f32 precision now so file round trips are bit-exact
          utt.features.at(row, f) = f32_quantize(v);
        }
      }
    }
    utt.duration_seconds = t0 * kFrameShiftSeconds;
    corpus.push_back(std::move(utt));
  }
  return corpus;
}

std::vector<int> pad_targets(const std::vector<int>& tokens, int max_len,
                             bool with_sos, int* valid_len) {
  std::vector<int> tgt;
  tgt.reserve(max_len);
  if (with_sos) tgt.push_back(kSosId);
  tgt.insert(tgt.end(), tokens.begin(), tokens.end());
  tgt.push_back(kEosId);
  int valid = static_cast<int>(tgt.size());
  if (valid > max_len) {
    throw DataError("pad_targets: transcript of " +
                    std::to_string(tokens.size()) + " tokens needs " +
                    std::to_string(valid) + " slots but max_len is " +
                    std::to_string(max_len));
  }
  tgt.resize(max_len, kEosId);
  if (valid_len) *valid_len = valid;
  return tgt;
}

Batch batchify(const Corpus& corpus, const std::vector<int>& indices,
               const Vocabulary& vocab, int max_len, bool with_sos) {
  if (indices.empty()) {
    throw DataError("batchify: empty batch");
  }
  if (max_len < 1) {
    throw ConfigError("batchify: max_len must be positive");
  }
  int b = static_cast<int>(indices.size());
  int t_max = 0;
  int d_feat = -1;
  for (int idx : indices) {
    if (idx < 0 || idx >= static_cast<int>(corpus.size())) {
      throw DataError("batchify: index " + std::to_string(idx) +
                      " outside corpus of " + std::to_string(corpus.size()));
    }
    const Utterance& utt = corpus[idx];
    if (utt.features.shape.size() != 2) {
      throw ShapeError("batchify: utterance " + utt.id +
                       " features must be 2-D, got " +
                       shape_str(utt.features.shape));
    }
    if (d_feat < 0) d_feat = utt.features.shape[1];
    if (utt.features.shape[1] != d_feat) {
      throw DataError("batchify: utterance " + utt.id + " has " +
                      std::to_string(utt.features.shape[1]) +
                      " feature dims, batch has " + std::to_string(d_feat));
    }
    t_max = std::max(t_max, utt.features.shape[0]);
  }

  Batch batch;
  batch.features = Tensor({b, t_max, d_feat});
  for (int i = 0; i < b; ++i) {
    const Utterance& utt = corpus[indices[i]];
    int t0 = utt.features.shape[0];
    batch.ids.push_back(utt.id);
    batch.frame_counts.push_back(t0);
    std::vector<std::uint8_t> mask(t_max, 0);
    std::fill(mask.begin(), mask.begin() + t0, 1);
    batch.frame_masks.push_back(std::move(mask));
    std::copy(utt.features.data.begin(), utt.features.data.end(),
              batch.features.data.begin() +
                  static_cast<std::size_t>(i) * t_max * d_feat);

    for (int tok : utt.tokens) {
      if (tok < kNumReservedIds || tok >= vocab.size()) {
        throw DataError("batchify: utterance " + utt.id + " has token id " +
                        std::to_string(tok) + " outside the real-token range");
      }
    }
    int needed = static_cast<int>(utt.tokens.size()) + (with_sos ? 2 : 1);
    if (needed > max_len) {
      throw DataError("batchify: utterance " + utt.id + " needs " +
                      std::to_string(needed) + " target slots but max_len is " +
                      std::to_string(max_len));
    }
    int valid = 0;
    batch.targets.push_back(pad_targets(utt.tokens, max_len, with_sos, &valid));
    batch.valid_lens.push_back(valid);
    batch.total_seconds += utt.duration_seconds;
  }
  return batch;
}

namespace {

void put_u16(std::string* out, std::uint32_t v) {
  out->push_back(static_cast<char>(v & 0xff));
  out->push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string* out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void put_f32(std::string* out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct ByteReader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) {
    if (pos + n > buf.size()) {
      throw FormatError("corpus file: truncated at byte offset " +
                        std::to_string(pos) + " reading " + what);
    }
  }
  std::uint32_t u16(const char* what) {
    need(2, what);
    std::uint32_t v = static_cast<std::uint8_t>(buf[pos]) |
                      (static_cast<std::uint8_t>(buf[pos + 1]) << 8);
    pos += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos + i]))
           << (8 * i);
    }
    pos += 4;
    return v;
  }
  float f32(const char* what) {
    std::uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::string out;
  out.append("LASO");
  put_u32(&out, kCorpusFormatVersion);
  put_u32(&out, static_cast<std::uint32_t>(corpus.size()));
  for (const Utterance& utt : corpus) {
    if (utt.id.size() > 0xffff) {
      throw DataError("save_corpus: utterance id longer than 65535 bytes");
    }
    if (utt.features.shape.size() != 2) {
      throw ShapeError("save_corpus: utterance " + utt.id +
                       " features must be 2-D, got " +
                       shape_str(utt.features.shape));
    }
    if (utt.tokens.size() > 0xffff) {
      throw DataError("save_corpus: utterance " + utt.id +
                      " has more than 65535 tokens");
    }
    put_u16(&out, static_cast<std::uint32_t>(utt.id.size()));
    out.append(utt.id);
    put_u32(&out, static_cast<std::uint32_t>(utt.features.shape[0]));
    put_u32(&out, static_cast<std::uint32_t>(utt.features.shape[1]));
    for (double v : utt.features.data) {
      put_f32(&out, static_cast<float>(v));
    }
    put_u16(&out, static_cast<std::uint32_t>(utt.tokens.size()));
    for (int tok : utt.tokens) {
      if (tok < 0) {
        throw DataError("save_corpus: negative token id in utterance " +
                        utt.id);
      }
      put_u32(&out, static_cast<std::uint32_t>(tok));
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw IoError("save_corpus: cannot open " + path);
  }
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  f.flush();
  if (!f) {
    throw IoError("save_corpus: write failed for " + path);
  }
}

Corpus load_corpus(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw IoError("load_corpus: cannot open " + path);
  }
  std::ostringstream ss;
  ss << f.rdbuf();
  std::string buf = ss.str();

  ByteReader r{buf};
  if (r.bytes(4, "magic") != "LASO") {
    throw FormatError("corpus file: bad magic at byte offset 0");
  }
  std::uint32_t version = r.u32("format version");
  if (version != kCorpusFormatVersion) {
    throw FormatError("corpus file: unsupported format version " +
                      std::to_string(version) + " at byte offset 4");
  }
  std::uint32_t count = r.u32("utterance count");
  Corpus corpus;
  corpus.reserve(count);
  for (std::uint32_t u = 0; u < count; ++u) {
    Utterance utt;
    std::uint32_t id_len = r.u16("id length");
    utt.id = r.bytes(id_len, "utterance id");
    std::uint32_t t0 = r.u32("frame count");
    std::uint32_t d_feat = r.u32("feature dim");
    std::uint64_t n_values = static_cast<std::uint64_t>(t0) * d_feat;
    r.need(n_values * 4, "feature values");
    utt.features = Tensor({static_cast<int>(t0), static_cast<int>(d_feat)});
    for (std::uint64_t i = 0; i < n_values; ++i) {
      utt.features.data[i] = static_cast<double>(r.f32("feature value"));
    }
    std::uint32_t n_tokens = r.u16("token count");
    utt.tokens.reserve(n_tokens);
    for (std::uint32_t i = 0; i < n_tokens; ++i) {
      std::size_t at = r.pos;
      std::uint32_t tok = r.u32("token id");
      if (tok > 0x7fffffff) {
        throw FormatError("corpus file: token id " + std::to_string(tok) +
                          " out of range at byte offset " + std::to_string(at));
      }
      utt.tokens.push_back(static_cast<int>(tok));
    }
    utt.duration_seconds = t0 * kFrameShiftSeconds;
    corpus.push_back(std::move(utt));
  }
  if (r.pos != buf.size()) {
    throw FormatError("corpus file: " + std::to_string(buf.size() - r.pos) +
                      " trailing bytes at byte offset " + std::to_string(r.pos));
  }
  return corpus;
}

}  // namespace laso
