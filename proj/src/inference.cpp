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

#include "laso/inference.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>

#include "laso/error.h"
#include "laso/vocab_ids.h"

namespace laso {

Hypothesis hypothesis_from_probs(const Tensor& probs) {
  check_ndim(probs, 2, "hypothesis_from_probs");
  Hypothesis hyp;
  for (int i = 0; i < probs.dim(0); ++i) {
    int best = 0;
    for (int v = 1; v < probs.dim(1); ++v) {
      if (probs.at(i, v) > probs.at(i, best)) best = v;
    }
    if (best == kEosId) break;
    if (best == kSosId) continue;
    hyp.ids.push_back(best);
    hyp.confidences.push_back(probs.at(i, best));
  }
  return hyp;
}

Hypothesis greedy_decode(LasoModel& model, const Tensor& features) {
  RunOpts opts;
  ForwardResult f = model.forward(nullptr, features, opts);
  return hypothesis_from_probs(f.probs.v());
}

CerResult cer(const std::vector<int>& ref, const std::vector<int>& hyp) {
  if (ref.empty()) {
    throw DataError("cer: empty reference");
  }
  const int n = static_cast<int>(ref.size());
  const int m = static_cast<int>(hyp.size());
  // d[i][j] = edit distance between ref[0..i) and hyp[0..j)
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1));
  for (int i = 0; i <= n; ++i) d[i][0] = i;
  for (int j = 0; j <= m; ++j) d[0][j] = j;
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= m; ++j) {
      int sub = d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      int del = d[i - 1][j] + 1;
      int ins = d[i][j - 1] + 1;
      d[i][j] = std::min(sub, std::min(del, ins));
    }
  }
  CerResult out;
  out.distance = d[n][m];
  // backtrace with a fixed preference (diagonal, deletion, insertion) to get
  // one deterministic operation breakdown among the cost-minimal scripts
  int i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        d[i][j] == d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++out.substitutions;
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ++out.deletions;
      --i;
    } else {
      ++out.insertions;
      --j;
    }
  }
  out.rate = static_cast<double>(out.distance) / n;
  return out;
}

EvalResult evaluate(LasoModel& model, const Corpus& corpus) {
  if (corpus.empty()) {
    throw DataError("evaluate: empty corpus");
  }
  EvalResult result;
  for (const Utterance& utt : corpus) {
    EvalUtterance row;
    row.id = utt.id;
    row.ref_ids = utt.tokens;
    row.hyp_ids = greedy_decode(model, utt.features).ids;
    row.score = cer(row.ref_ids, row.hyp_ids);
    result.total_distance += row.score.distance;
    result.total_ref_len += static_cast<std::int64_t>(row.ref_ids.size());
    result.utterances.push_back(std::move(row));
  }
  result.cer = static_cast<double>(result.total_distance) /
               static_cast<double>(result.total_ref_len);
  return result;
}

namespace {

struct PassTiming {
  double total = 0.0;
  std::vector<double> per_utterance;
  DecodeStats counts;
};

// Runs the whole corpus `repeats` times through `decode_one` and reports
// the pass with the median total. Invocation counts must not vary between
// passes; wall clock may.
BenchReport run_system(const Corpus& corpus, int repeats,
                       const std::function<void(const Utterance&)>& decode_one,
                       const std::function<DecodeStats()>& read_stats) {
  using clock = std::chrono::steady_clock;
  std::vector<PassTiming> passes(repeats);
  for (int r = 0; r < repeats; ++r) {
    PassTiming& pass = passes[r];
    DecodeStats before = read_stats();
    for (const Utterance& utt : corpus) {
      auto t0 = clock::now();
      decode_one(utt);
      auto t1 = clock::now();
      double s = std::chrono::duration<double>(t1 - t0).count();
      pass.per_utterance.push_back(s);
      pass.total += s;
    }
    DecodeStats after = read_stats();
    pass.counts.decoder_passes = after.decoder_passes - before.decoder_passes;
    pass.counts.decoder_block_calls =
        after.decoder_block_calls - before.decoder_block_calls;
    if (r > 0 && (pass.counts.decoder_passes != passes[0].counts.decoder_passes ||
                  pass.counts.decoder_block_calls !=
                      passes[0].counts.decoder_block_calls)) {
      throw ArchError("benchmark: decoder invocation counts differ between "
                      "passes over the same corpus");
    }
  }
  std::vector<int> order(repeats);
  for (int r = 0; r < repeats; ++r) order[r] = r;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return passes[a].total < passes[b].total; });
  const PassTiming& median = passes[order[(repeats - 1) / 2]];
  BenchReport report;
  report.total_processing_seconds = median.total;
  report.n_utterances = static_cast<int>(corpus.size());
  report.utterance_seconds = median.per_utterance;
  report.decoder_passes = median.counts.decoder_passes;
  report.decoder_block_calls = median.counts.decoder_block_calls;
  for (const Utterance& utt : corpus) {
    report.total_audio_seconds += utt.duration_seconds;
  }
  return report;
}

}  // namespace

BenchResult benchmark(const Corpus& corpus, LasoModel& nar_model,
                      ArBaselineModel& ar_model, int beam, int repeats) {
  if (corpus.empty()) {
    throw DataError("benchmark: empty corpus");
  }
  if (beam < 1) {
    throw ConfigError("benchmark: beam must be >= 1, got " +
                      std::to_string(beam));
  }
  if (repeats < 1) {
    throw ConfigError("benchmark: repeats must be >= 1, got " +
                      std::to_string(repeats));
  }
  BenchResult result;
  result.beam = beam;
  result.repeats = repeats;
  result.nar = run_system(
      corpus, repeats,
      [&](const Utterance& utt) { greedy_decode(nar_model, utt.features); },
      [&] { return nar_model.stats(); });
  const int ar_cap = ar_model.config().max_len;
  result.ar = run_system(
      corpus, repeats,
      [&](const Utterance& utt) {
        ar_beam_decode(ar_model, utt.features, beam, ar_cap);
      },
      [&] { return ar_model.stats(); });
  result.speedup_apt = result.ar.apt() / result.nar.apt();
  result.speedup_rtf = result.ar.rtf() / result.nar.rtf();
  return result;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join_tokens(const std::vector<int>& ids, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += vocab.token(ids[i]);
  }
  return out;
}

}  // namespace

std::string bench_csv(const BenchResult& r) {
  std::ostringstream s;
  s << "system,utterance_index,processing_seconds\n";
  for (std::size_t i = 0; i < r.nar.utterance_seconds.size(); ++i) {
    s << "nar," << i << "," << fmt(r.nar.utterance_seconds[i]) << "\n";
  }
  for (std::size_t i = 0; i < r.ar.utterance_seconds.size(); ++i) {
    s << "ar," << i << "," << fmt(r.ar.utterance_seconds[i]) << "\n";
  }
  return s.str();
}

std::string bench_summary(const BenchResult& r) {
  std::ostringstream s;
  s << "benchmark: " << r.nar.n_utterances << " utterances, "
    << fmt(r.nar.total_audio_seconds) << " s audio, beam " << r.beam
    << ", median of " << r.repeats << " passes\n";
  char line[256];
  std::snprintf(line, sizeof line,
                "  nar: total %.4f s  RTF %.6f  APT %.6f s  passes %llu  "
                "block calls %llu\n",
                r.nar.total_processing_seconds, r.nar.rtf(), r.nar.apt(),
                static_cast<unsigned long long>(r.nar.decoder_passes),
                static_cast<unsigned long long>(r.nar.decoder_block_calls));
  s << line;
  std::snprintf(line, sizeof line,
                "  ar:  total %.4f s  RTF %.6f  APT %.6f s  passes %llu  "
                "block calls %llu\n",
                r.ar.total_processing_seconds, r.ar.rtf(), r.ar.apt(),
                static_cast<unsigned long long>(r.ar.decoder_passes),
                static_cast<unsigned long long>(r.ar.decoder_block_calls));
  s << line;
  std::snprintf(line, sizeof line, "  speedup: APT %.2fx  RTF %.2fx\n",
                r.speedup_apt, r.speedup_rtf);
  s << line;
  return s.str();
}

std::string eval_csv(const EvalResult& r, const Vocabulary& vocab) {
  std::ostringstream s;
  s << "id,ref,hyp,distance,substitutions,insertions,deletions,cer\n";
  for (const EvalUtterance& u : r.utterances) {
    s << u.id << "," << join_tokens(u.ref_ids, vocab) << ","
      << join_tokens(u.hyp_ids, vocab) << "," << u.score.distance << ","
      << u.score.substitutions << "," << u.score.insertions << ","
      << u.score.deletions << "," << fmt(u.score.rate) << "\n";
  }
  return s.str();
}

std::string eval_summary(const EvalResult& r) {
  char line[160];
  std::snprintf(line, sizeof line,
                "evaluate: %zu utterances, edit distance %lld / %lld tokens, "
                "CER %.4f\n",
                r.utterances.size(),
                static_cast<long long>(r.total_distance),
                static_cast<long long>(r.total_ref_len), r.cer);
  return line;
}

}  // namespace laso
