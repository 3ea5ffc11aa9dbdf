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

#include "laso/cli.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "laso/checkpoint.h"
#include "laso/config.h"
#include "laso/data.h"
#include "laso/error.h"
#include "laso/inference.h"
#include "laso/model.h"
#include "laso/rng.h"
#include "laso/training.h"

namespace laso {

namespace {

// LASO_LOG=quiet silences progress lines; =debug adds detail. Data outputs
// (summaries, hypotheses) always go to stdout; logs go to stderr.
int log_level() {
  const char* v = std::getenv("LASO_LOG");
  if (!v) return 1;
  std::string s = v;
  if (s == "quiet") return 0;
  if (s == "debug") return 2;
  return 1;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << msg << std::endl;
}

void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::cerr << msg << std::endl;
}

// Model init draws from a stream id no other consumer uses (the teacher
// uses 1..4 off its own root, the trainer 100+/200+/300+ per epoch).
constexpr std::uint64_t kInitStreamId = 50;

struct CommonOpts {
  std::string config_path;
  std::string preset;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_config_flags(CLI::App* cmd, CommonOpts* opts) {
  cmd->add_option("--config", opts->config_path,
                  "JSON configuration file (default: the tiny preset)");
  cmd->add_option("--preset", opts->preset,
                  "Built-in profile: tiny, small or paper-shape");
  cmd->add_option("--override", opts->overrides,
                  "Override one config key, e.g. train.epochs=5 (repeatable)");
  cmd->add_option("--seed", opts->seed, "Override the top-level seed")
      ->each([opts](const std::string&) { opts->seed_set = true; });
}

RunConfig resolve_config(const CommonOpts& opts) {
  if (!opts.config_path.empty() && !opts.preset.empty()) {
    throw ConfigError("config: give either --config or --preset, not both");
  }
  std::string text;
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path, std::ios::binary);
    if (!in) {
      throw IoError("config: cannot open " + opts.config_path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    text = buf.str();
  } else {
    text = preset_json(opts.preset.empty() ? "tiny" : opts.preset);
  }
  for (const std::string& ov : opts.overrides) {
    text = apply_override(text, ov);
  }
  RunConfig cfg = parse_run_config(text);
  if (opts.seed_set) cfg.seed = opts.seed;
  cfg.validate();
  return cfg;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create directory " + dir + ": " + ec.message());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open " + path + " for writing");
  }
  out << text;
  out.flush();
  if (!out) {
    throw IoError("write failed for " + path);
  }
}

Corpus load_split(const std::string& data_dir, const std::string& split,
                  int limit) {
  std::string path = data_dir + "/" + split + ".corpus";
  Corpus corpus = load_corpus(path);
  if (limit > 0 && static_cast<int>(corpus.size()) > limit) {
    corpus.resize(limit);
  }
  return corpus;
}

// A checkpoint plus the model rebuilt from its embedded configuration.
struct LoadedModel {
  RunConfig cfg;
  std::unique_ptr<LasoModel> laso;
  std::unique_ptr<ArBaselineModel> ar;
};

LoadedModel load_model(const std::string& ckpt_path) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  LoadedModel out;
  out.cfg = parse_run_config(ckpt.config_json);
  out.cfg.validate();
  RngStream root(out.cfg.seed);
  RngStream init = root.fork(kInitStreamId);
  if (out.cfg.model_kind == "laso") {
    out.laso = std::make_unique<LasoModel>(laso_config(out.cfg), &init);
    restore(ckpt, out.laso->parameters());
  } else {
    out.ar = std::make_unique<ArBaselineModel>(ar_config(out.cfg), &init);
    restore(ckpt, out.ar->parameters());
  }
  return out;
}

int cmd_gen_data(const CommonOpts& common, const std::string& out_dir) {
  RunConfig cfg = resolve_config(common);
  ensure_dir(out_dir);
  SyntheticSpec spec = synthetic_spec(cfg);
  Vocabulary vocab = Vocabulary::make_default(cfg.vocab_size);
  vocab.save(out_dir + "/vocab.txt");
  SyntheticSpec held = spec;
  held.n_utterances = std::max(1, spec.n_utterances / 10);
  Corpus train = generate_corpus(spec, 0, "utt");
  Corpus dev = generate_corpus(held, 1, "dev");
  Corpus test = generate_corpus(held, 2, "test");
  save_corpus(train, out_dir + "/train.corpus");
  save_corpus(dev, out_dir + "/dev.corpus");
  save_corpus(test, out_dir + "/test.corpus");
  write_text(out_dir + "/config.json", run_config_json(cfg) + "\n");
  log_info("gen-data: wrote " + std::to_string(train.size()) + " train / " +
           std::to_string(dev.size()) + " dev / " + std::to_string(test.size()) +
           " test utterances to " + out_dir);
  return 0;
}

int cmd_train(const CommonOpts& common, const std::string& data_dir,
              const std::string& out_dir) {
  RunConfig cfg = resolve_config(common);
  Corpus corpus = load_split(data_dir, "train", 0);
  Vocabulary vocab = Vocabulary::load(data_dir + "/vocab.txt");
  if (vocab.size() != cfg.vocab_size) {
    throw ConfigError("train: vocabulary file has " +
                      std::to_string(vocab.size()) +
                      " tokens but the config says " +
                      std::to_string(cfg.vocab_size));
  }
  ensure_dir(out_dir);
  RngStream root(cfg.seed);
  RngStream init = root.fork(kInitStreamId);
  FitResult result;
  if (cfg.model_kind == "laso") {
    LasoModel model(laso_config(cfg), &init);
    std::unique_ptr<ToyTeacher> teacher;
    if (cfg.train.lambda > 0.0) {
      log_info("train: pretraining the toy teacher (" +
               std::to_string(cfg.teacher_epochs) + " epochs)");
      teacher = std::make_unique<ToyTeacher>(
          pretrain_toy_teacher(corpus, teacher_config(cfg)));
    }
    result = fit(model, corpus, vocab, train_config(cfg), teacher.get(),
                 out_dir, run_config_json(cfg));
  } else {
    ArBaselineModel model(ar_config(cfg), &init);
    result = fit_ar(model, corpus, vocab, train_config(cfg), out_dir,
                    run_config_json(cfg));
  }
  log_info("train: " + std::to_string(result.trace.size()) + " steps, " +
           std::to_string(result.checkpoint_paths.size()) +
           " epoch checkpoints, final model at " + result.final_path);
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir,
             const std::string& split, int limit, int beam,
             const std::string& out_path) {
  LoadedModel m = load_model(ckpt_path);
  Corpus corpus = load_split(data_dir, split, limit);
  Vocabulary vocab = Vocabulary::load(data_dir + "/vocab.txt");
  EvalResult result;
  if (m.laso) {
    result = evaluate(*m.laso, corpus);
  } else {
    // the baseline is scored through its own beam decoder
    for (const Utterance& utt : corpus) {
      EvalUtterance row;
      row.id = utt.id;
      row.ref_ids = utt.tokens;
      row.hyp_ids =
          ar_beam_decode(*m.ar, utt.features, beam, m.cfg.max_len).tokens;
      row.score = cer(row.ref_ids, row.hyp_ids);
      result.total_distance += row.score.distance;
      result.total_ref_len += static_cast<std::int64_t>(row.ref_ids.size());
      result.utterances.push_back(std::move(row));
    }
    result.cer = static_cast<double>(result.total_distance) /
                 static_cast<double>(result.total_ref_len);
  }
  if (!out_path.empty()) {
    write_text(out_path, eval_csv(result, vocab));
    log_info("eval: wrote per-utterance results to " + out_path);
  }
  std::cout << eval_summary(result);
  return 0;
}

int cmd_decode(const std::string& ckpt_path, const std::string& data_dir,
               const std::string& split, int limit, int beam,
               const std::string& out_path) {
  LoadedModel m = load_model(ckpt_path);
  Corpus corpus = load_split(data_dir, split, limit);
  Vocabulary vocab = Vocabulary::load(data_dir + "/vocab.txt");
  std::ostringstream text;
  for (const Utterance& utt : corpus) {
    std::vector<int> ids =
        m.laso ? greedy_decode(*m.laso, utt.features).ids
               : ar_beam_decode(*m.ar, utt.features, beam, m.cfg.max_len).tokens;
    text << utt.id;
    for (int id : ids) text << "\t" << vocab.token(id);
    text << "\n";
  }
  if (out_path.empty()) {
    std::cout << text.str();
  } else {
    write_text(out_path, text.str());
    log_info("decode: wrote " + std::to_string(corpus.size()) +
             " hypotheses to " + out_path);
  }
  return 0;
}

int cmd_bench(const std::string& nar_ckpt, const std::string& ar_ckpt,
              const std::string& data_dir, const std::string& split, int limit,
              int beam, int repeats, const std::string& out_dir) {
  LoadedModel nar = load_model(nar_ckpt);
  LoadedModel ar = load_model(ar_ckpt);
  if (!nar.laso) {
    throw ArchError("bench: " + nar_ckpt + " does not hold a one-pass model");
  }
  if (!ar.ar) {
    throw ArchError("bench: " + ar_ckpt +
                    " does not hold an autoregressive model");
  }
  Corpus corpus = load_split(data_dir, split, limit);
  log_info("bench: " + std::to_string(corpus.size()) + " utterances, beam " +
           std::to_string(beam) + ", " + std::to_string(repeats) + " repeats");
  BenchResult result = benchmark(corpus, *nar.laso, *ar.ar, beam, repeats);
  std::cout << bench_summary(result);
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    write_text(out_dir + "/bench.csv", bench_csv(result));
    write_text(out_dir + "/summary.txt", bench_summary(result));
    log_info("bench: wrote " + out_dir + "/bench.csv and summary.txt");
  }
  return 0;
}

std::string matrix_csv(const Tensor& m) {
  std::ostringstream s;
  for (int i = 0; i < m.dim(0); ++i) {
    for (int j = 0; j < m.dim(1); ++j) {
      if (j) s << ",";
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", m.at(i, j));
      s << buf;
    }
    s << "\n";
  }
  return s.str();
}

// Binary 8-bit PGM scaled so 0 -> black and 1 -> white; attention rows are
// probabilities, so no further normalization is applied.
std::string matrix_pgm(const Tensor& m) {
  std::ostringstream s;
  s << "P5\n" << m.dim(1) << " " << m.dim(0) << "\n255\n";
  for (int i = 0; i < m.dim(0); ++i) {
    for (int j = 0; j < m.dim(1); ++j) {
      double v = m.at(i, j);
      if (v < 0.0) v = 0.0;
      if (v > 1.0) v = 1.0;
      s << static_cast<char>(static_cast<int>(v * 255.0 + 0.5));
    }
  }
  return s.str();
}

int cmd_export_attention(const std::string& ckpt_path,
                         const std::string& data_dir, const std::string& split,
                         const std::string& utt_id, const std::string& out_dir) {
  LoadedModel m = load_model(ckpt_path);
  if (!m.laso) {
    throw ArchError("export-attention: " + ckpt_path +
                    " does not hold a one-pass model");
  }
  Corpus corpus = load_split(data_dir, split, 0);
  const Utterance* utt = nullptr;
  if (utt_id.empty()) {
    utt = &corpus.front();
  } else {
    for (const Utterance& u : corpus) {
      if (u.id == utt_id) {
        utt = &u;
        break;
      }
    }
    if (!utt) {
      throw DataError("export-attention: no utterance '" + utt_id + "' in " +
                      split);
    }
  }
  ensure_dir(out_dir);
  RunOpts opts;
  opts.collect_diagnostics = true;
  ForwardResult f = m.laso->forward(nullptr, utt->features, opts);
  int written = 0;
  for (const auto& [key, scores] : f.diagnostics) {
    std::string stem = out_dir + "/" + key.module + "_l" +
                       std::to_string(key.layer) + "_h" +
                       std::to_string(key.head);
    write_text(stem + ".csv", matrix_csv(scores));
    write_text(stem + ".pgm", matrix_pgm(scores));
    ++written;
  }
  log_info("export-attention: " + utt->id + ": wrote " +
           std::to_string(written) + " matrices to " + out_dir);
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"One-pass speech recognizer with a position-dependent "
               "summarizer, plus an autoregressive baseline"};
  app.require_subcommand(1);

  CommonOpts gen_common;
  std::string gen_out = "data";
  CLI::App* gen = app.add_subcommand(
      "gen-data", "Generate the synthetic corpus and vocabulary");
  add_config_flags(gen, &gen_common);
  gen->add_option("--out", gen_out, "Output directory (default: data)");

  CommonOpts train_common;
  std::string train_data = "data";
  std::string train_out = "runs/model";
  CLI::App* train = app.add_subcommand("train", "Train a model");
  add_config_flags(train, &train_common);
  train->add_option("--data", train_data, "Corpus directory from gen-data");
  train->add_option("--out", train_out, "Checkpoint/trace output directory");

  std::string eval_ckpt, eval_data = "data", eval_split = "test", eval_out;
  int eval_limit = 0, eval_beam = 1;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score a model with CER");
  eval_cmd->add_option("--ckpt", eval_ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--data", eval_data, "Corpus directory");
  eval_cmd->add_option("--split", eval_split, "Corpus split (train/dev/test)");
  eval_cmd->add_option("--limit", eval_limit, "Evaluate only the first N");
  eval_cmd->add_option("--beam", eval_beam,
                       "Beam width for autoregressive checkpoints");
  eval_cmd->add_option("--out", eval_out, "Write per-utterance CSV here");

  std::string dec_ckpt, dec_data = "data", dec_split = "test", dec_out;
  int dec_limit = 0, dec_beam = 1;
  CLI::App* dec = app.add_subcommand("decode", "Write hypothesis transcripts");
  dec->add_option("--ckpt", dec_ckpt, "Checkpoint file")->required();
  dec->add_option("--data", dec_data, "Corpus directory");
  dec->add_option("--split", dec_split, "Corpus split");
  dec->add_option("--limit", dec_limit, "Decode only the first N");
  dec->add_option("--beam", dec_beam,
                  "Beam width for autoregressive checkpoints");
  dec->add_option("--out", dec_out, "Output file (default: stdout)");

  std::string bench_nar, bench_ar, bench_data = "data", bench_split = "test";
  std::string bench_out;
  int bench_limit = 0, bench_beam = 10, bench_repeats = 5;
  CLI::App* bench = app.add_subcommand(
      "bench", "Time one-pass decoding against the autoregressive baseline");
  bench->add_option("--nar-ckpt", bench_nar, "One-pass model checkpoint")
      ->required();
  bench->add_option("--ar-ckpt", bench_ar, "Baseline checkpoint")->required();
  bench->add_option("--data", bench_data, "Corpus directory");
  bench->add_option("--split", bench_split, "Corpus split");
  bench->add_option("--limit", bench_limit, "Use only the first N utterances");
  bench->add_option("--beam", bench_beam, "Baseline beam width (default 10)");
  bench->add_option("--repeats", bench_repeats,
                    "Timed passes; the median is reported (default 5)");
  bench->add_option("--out", bench_out, "Directory for bench.csv + summary");

  std::string att_ckpt, att_data = "data", att_split = "test", att_utt;
  std::string att_out = "attention";
  CLI::App* att = app.add_subcommand(
      "export-attention", "Dump attention matrices for one utterance");
  att->add_option("--ckpt", att_ckpt, "Checkpoint file")->required();
  att->add_option("--data", att_data, "Corpus directory");
  att->add_option("--split", att_split, "Corpus split");
  att->add_option("--utt", att_utt, "Utterance id (default: first in split)");
  att->add_option("--out", att_out, "Output directory");

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help and friends
    }
    std::cerr << "error [config]: " << e.what() << std::endl;
    return 2;
  }

  try {
    if (app.got_subcommand(gen)) return cmd_gen_data(gen_common, gen_out);
    if (app.got_subcommand(train)) {
      return cmd_train(train_common, train_data, train_out);
    }
    if (app.got_subcommand(eval_cmd)) {
      return cmd_eval(eval_ckpt, eval_data, eval_split, eval_limit, eval_beam,
                      eval_out);
    }
    if (app.got_subcommand(dec)) {
      return cmd_decode(dec_ckpt, dec_data, dec_split, dec_limit, dec_beam,
                        dec_out);
    }
    if (app.got_subcommand(bench)) {
      return cmd_bench(bench_nar, bench_ar, bench_data, bench_split,
                       bench_limit, bench_beam, bench_repeats, bench_out);
    }
    if (app.got_subcommand(att)) {
      return cmd_export_attention(att_ckpt, att_data, att_split, att_utt,
                                  att_out);
    }
    std::cerr << "error [config]: no command given" << std::endl;
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error [config]: " << e.what() << std::endl;
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error [io]: " << e.what() << std::endl;
    return 3;
  } catch (const FormatError& e) {
    std::cerr << "error [format]: " << e.what() << std::endl;
    return 4;
  } catch (const ArchError& e) {
    std::cerr << "error [arch]: " << e.what() << std::endl;
    return 5;
  } catch (const DataError& e) {
    std::cerr << "error [data]: " << e.what() << std::endl;
    return 6;
  } catch (const Error& e) {
    std::cerr << "error [" << e.category() << "]: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error [internal]: " << e.what() << std::endl;
    return 1;
  }
}

int cli_main(const std::vector<std::string>& args) {
  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.push_back("laso");
  for (const std::string& a : args) argv_store.push_back(a);
  std::vector<const char*> argv;
  argv.reserve(argv_store.size());
  for (const std::string& a : argv_store) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace laso
