// wdtcn command-line tool: gen-data, train, eval, analyze, params.
// Exit codes: 0 success, 1 runtime error, 2 usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wdtcn/analysis.h"
#include "wdtcn/checkpoint.h"
#include "wdtcn/model.h"
#include "wdtcn/train.h"
#include "wdtcn/wav.h"

namespace fs = std::filesystem;
using namespace wdtcn;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by the subcommands. Optional values override the config file.
struct Options {
  std::string config_file;
  std::optional<std::string> variant;
  std::optional<int> x, r;
  std::uint64_t seed = 0;
  std::string out;
  std::string corpus;
  std::vector<double> t60_bins;
  std::vector<std::string> checkpoints;

  // synthetic corpus, used when --corpus is absent
  std::size_t count = 16;
  double seconds = 4.0;
  double t60_min = 0.1;
  double t60_max = 1.0;
  std::uint64_t data_seed = 0;

  // training
  std::optional<int> epochs;
  std::optional<std::size_t> batch;
  std::optional<double> lr;
  std::optional<double> val_fraction;
  std::size_t threads = 1;
  bool resume = false;
  bool quiet = false;
};

nlohmann::json config_json(const Options& o) {
  if (o.config_file.empty()) return nlohmann::json::object();
  if (!fs::exists(o.config_file)) throw UsageError("config file not found: " + o.config_file);
  nlohmann::json j = read_json_file(o.config_file);
  if (!j.is_object()) throw UsageError("config file must hold a JSON object");
  return j;
}

ModelConfig model_config(const Options& o) {
  const nlohmann::json j = config_json(o);
  nlohmann::json m = j.value("model", nlohmann::json::object());
  if (o.variant) m["variant"] = *o.variant;
  if (o.x) m["X"] = *o.x;
  if (o.r) m["R"] = *o.r;
  return config_from_json(m);
}

TrainConfig train_config(const Options& o) {
  const nlohmann::json j = config_json(o).value("train", nlohmann::json::object());
  TrainConfig tc;
  try {
    tc.epochs = j.value("epochs", tc.epochs);
    tc.batch_size = j.value("batch_size", tc.batch_size);
    tc.lr_initial = j.value("lr_initial", tc.lr_initial);
    tc.lr_halve_patience = j.value("lr_halve_patience", tc.lr_halve_patience);
    tc.clip_seconds = j.value("clip_seconds", tc.clip_seconds);
    tc.grad_clip_norm = j.value("grad_clip_norm", tc.grad_clip_norm);
    tc.validation_fraction = j.value("validation_fraction", tc.validation_fraction);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("train config: ") + ex.what());
  }
  if (o.epochs) tc.epochs = *o.epochs;
  if (o.batch) tc.batch_size = *o.batch;
  if (o.lr) tc.lr_initial = *o.lr;
  if (o.val_fraction) tc.validation_fraction = *o.val_fraction;
  tc.seed = o.seed;
  tc.threads = o.threads;
  tc.out_dir = o.out;
  return tc;
}

std::vector<ReverbSample> corpus_for(const Options& o) {
  if (!o.corpus.empty()) {
    if (!fs::exists(o.corpus)) throw UsageError("manifest not found: " + o.corpus);
    return load_corpus(o.corpus);
  }
  CorpusOptions c;
  c.count = o.count;
  c.duration_s = o.seconds;
  c.t60_min = o.t60_min;
  c.t60_max = o.t60_max;
  c.seed = o.data_seed;
  return generate_corpus(c);
}

Model load_model(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path);
  return load_checkpoint(path);
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

int run_gen_data(const Options& o) {
  if (o.out.empty()) throw UsageError("gen-data needs --out");
  const fs::path manifest = write_corpus(corpus_for(o), o.out);
  std::cout << manifest.string() << '\n';
  return 0;
}

int run_train(const Options& o) {
  if (o.out.empty()) throw UsageError("train needs --out");
  const auto corpus = corpus_for(o);
  TrainConfig tc = train_config(o);
  if (!o.quiet) tc.log = &std::cerr;

  const fs::path state_file = fs::path(o.out) / "state.json";
  TrainState st;
  std::optional<Model> model;
  if (o.resume && fs::exists(state_file)) {
    auto [m, s] = train_state_from_json(read_json_file(state_file));
    model.emplace(std::move(m));
    st = train(*model, corpus, tc, std::move(s));
  } else {
    model.emplace(model_config(o), o.seed);
    st = train(*model, corpus, tc);
  }
  save_checkpoint(fs::path(o.out) / "final.ckpt.json", *model);
  if (!st.history.empty()) {
    std::printf("final train loss %.2f dB after %d epochs\n",
                st.history.back().train_loss_db, st.epoch);
  }
  return 0;
}

int run_eval(const Options& o) {
  if (o.corpus.empty()) throw UsageError("eval needs --corpus");
  const auto corpus = corpus_for(o);
  if (o.checkpoints.empty()) {
    // No model: score the unprocessed input against the target.
    std::printf("%.2f\n", mean(input_sisdr(corpus)));
    return 0;
  }
  for (const auto& path : o.checkpoints) {
    const double m = mean(evaluate_sisdr(load_model(path), corpus));
    if (o.checkpoints.size() == 1) {
      std::printf("%.2f\n", m);
    } else {
      std::printf("%s %.2f\n", path.c_str(), m);
    }
  }
  return 0;
}

int run_analyze(const Options& o) {
  if (o.checkpoints.empty()) throw UsageError("analyze needs at least one --checkpoint");
  if (o.out.empty()) throw UsageError("analyze needs --out");
  const auto corpus = corpus_for(o);
  std::vector<AttentionRecord> records;
  for (std::size_t i = 0; i < o.checkpoints.size(); ++i) {
    auto r = collect_attention(load_model(o.checkpoints[i]), corpus, i);
    records.insert(records.end(), r.begin(), r.end());
  }
  const auto edges = o.t60_bins.empty() ? default_t60_edges() : o.t60_bins;
  const BinningResult bins = bin_by_t60(records, edges);
  for (const auto& s : bins.spill) {
    std::cerr << "spill: model " << s.model_id << " " << s.utterance_id << " block "
              << s.block_index << " t60 " << s.t60 << '\n';
  }
  fs::create_directories(o.out);
  const std::string csv = bins_csv(bins.bins);
  write_text(fs::path(o.out) / "t60_bins.csv", csv);
  std::cout << csv;
  return 0;
}

int run_params(const Options& o) {
  const ModelConfig c = model_config(o);
  const ParameterReport report = count_parameters(c);
  std::printf("%s X=%d R=%d N=%d B=%d H=%d P=%d L_BL=%d\n", to_string(c.variant).c_str(),
              c.x, c.r, c.n, c.b, c.h, c.p, c.l_bl);
  for (const auto& item : report.items) {
    std::printf("  %-28s %12zu\n", item.name.c_str(), item.count);
  }
  std::printf("  %-28s %12zu (%.2fM)\n", "total", report.total,
              static_cast<double>(report.total) / 1e6);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"WD-TCN and TCN speech dereverberation"};
  app.require_subcommand(1);
  Options o;

  auto model_flags = [&](CLI::App* s) {
    s->add_option("--config", o.config_file, "JSON file with model/train sections");
    s->add_option("--variant", o.variant, "tcn or wd-tcn");
    s->add_option("--x", o.x, "conv blocks per stack");
    s->add_option("--r", o.r, "stack repeats");
  };
  auto data_flags = [&](CLI::App* s) {
    s->add_option("--corpus", o.corpus, "manifest.jsonl; synthetic corpus when absent");
    s->add_option("--count", o.count, "synthetic clips");
    s->add_option("--seconds", o.seconds, "synthetic clip length");
    s->add_option("--t60-min", o.t60_min);
    s->add_option("--t60-max", o.t60_max);
    s->add_option("--data-seed", o.data_seed, "synthetic corpus seed");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic corpus and manifest");
  data_flags(gen);
  gen->add_option("--seed", o.data_seed, "corpus seed");
  gen->add_option("--out", o.out, "output directory");

  CLI::App* tr = app.add_subcommand("train", "train a model");
  model_flags(tr);
  data_flags(tr);
  tr->add_option("--seed", o.seed, "init and shuffle seed");
  tr->add_option("--out", o.out, "output directory");
  tr->add_option("--epochs", o.epochs);
  tr->add_option("--batch", o.batch);
  tr->add_option("--lr", o.lr);
  tr->add_option("--val-fraction", o.val_fraction);
  tr->add_option("--threads", o.threads)->check(CLI::PositiveNumber);
  tr->add_flag("--resume", o.resume, "continue from <out>/state.json");
  tr->add_flag("--quiet", o.quiet);

  CLI::App* ev = app.add_subcommand("eval", "mean SI-SDR (dB) over a manifest");
  data_flags(ev);
  ev->add_option("--checkpoint", o.checkpoints, "model checkpoint (repeatable)");

  CLI::App* an = app.add_subcommand("analyze", "attention weights by T60 bin");
  data_flags(an);
  an->add_option("--checkpoint", o.checkpoints, "wd-tcn checkpoint (repeatable)");
  an->add_option("--t60-bins", o.t60_bins, "bin edges, e.g. 0.1,0.4,1.0")->delimiter(',');
  an->add_option("--out", o.out, "output directory");

  CLI::App* pa = app.add_subcommand("params", "itemized parameter count");
  model_flags(pa);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (gen->parsed()) return run_gen_data(o);
    if (tr->parsed()) return run_train(o);
    if (ev->parsed()) return run_eval(o);
    if (an->parsed()) return run_analyze(o);
    return run_params(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
