#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "dualspeech/checkpoint.hpp"
#include "dualspeech/config.hpp"
#include "dualspeech/error.hpp"
#include "dualspeech/experiment.hpp"
#include "dualspeech/formats.hpp"

using namespace dualspeech;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dualspeech_cli_formats_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunConfig tiny_run() {
  RunConfig cfg = parse_config(
      "model.layers = 1\nmodel.dim = 16\nmodel.ffn_dim = 32\nmodel.heads = 2\nmodel.max_seq_len = 256\n"
      "model.prenet_hidden = 16\nmodel.postnet_hidden = 16\nmodel.postnet_layers = 2\nmodel.postnet_kernel = 3\n"
      "train.group_size = 2\ntrain.steps = 4\ntrain.checkpoint_every = 2\nadam.warmup_steps = 10\n"
      "split.train = 40\nsplit.val = 5\nsplit.test = 5\nsplit.paired = 4\n");
  return cfg;
}

ExperimentData tiny_data(const RunConfig& cfg) {
  ToySpec spec;
  spec.inventory = 6;
  spec.min_length = 3;
  spec.max_length = 5;
  spec.count = 50;
  ToyCorpus toy = synthesize_toy_corpus(spec, 1);
  return make_experiment_data(cfg, toy.vocab, toy.utterances);
}

}  // namespace

TEST_CASE("config defaults") {
  const RunConfig c;
  CHECK(c.model.transformer.num_layers == 4);
  CHECK(c.model.transformer.model_dim == 256);
  CHECK(c.model.prenet_hidden == 256);
  CHECK(c.model.postnet_hidden == 256);
  CHECK(c.model.transformer.ffn_dim == 1024);
  CHECK(c.model.n_mels == 80);
  CHECK(c.model.postnet_layers == 5);
  CHECK(c.training.corruption.mask_prob == 0.3);
  CHECK(c.training.group_size == 32);
  CHECK(c.split.paired == 200);
  CHECK(c.split.train == 12500);
  CHECK(c.split.val == 300);
  CHECK(c.split.test == 300);
  CHECK(c.stft.frame_length == 800);
  CHECK(c.stft.hop_length == 200);
  CHECK(c.adam.beta1 == 0.9);
  CHECK(c.adam.beta2 == 0.98);
  CHECK(c.adam.epsilon == 1e-9);
  CHECK(c.adam.d_model == 256);
  CHECK(c.training.ablation.dae);
  CHECK(c.training.ablation.dt);
  CHECK(c.training.ablation.bsm);
}

TEST_CASE("config echo round trips") {
  RunConfig c = tiny_run();
  set_config_value(c, "corruption.mask_prob", "0.1");
  set_config_value(c, "ablation.bsm", "false");
  set_config_value(c, "paths.corpus", "/tmp/some corpus");
  set_config_value(c, "adam.lr_scale", "0.30000000000000004");
  const std::string echo = format_config(c);
  CHECK(format_config(parse_config(echo)) == echo);
  const RunConfig back = parse_config(echo);
  CHECK(back.training.corruption.mask_prob == 0.1);
  CHECK_FALSE(back.training.ablation.bsm);
  CHECK(back.corpus_dir == "/tmp/some corpus");
  CHECK(back.adam.lr_scale == 0.30000000000000004);
  CHECK(back.adam.d_model == 16);
  // Every key appears once.
  for (const std::string& key : config_keys()) {
    const bool present = ("\n" + echo).find("\n" + key + " = ") != std::string::npos;
    CHECK(present);
  }
}

TEST_CASE("config errors") {
  CHECK_NOTHROW(parse_config("# comment only\n\n  model.layers = 2   # trailing\n"));
  try {
    parse_config("model.layers = 2\nmodel.layer = 3\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(std::string(e.what()).find("model.layer") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("model.layers = two\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("model.layers = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("corruption.mask_prob = 0.3x\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("ablation.dae = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("model.layers\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("model.heads = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("corruption.mask_prob = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/run.cfg"), ConfigError);
}

TEST_CASE("feature file round trip and rejection") {
  const fs::path dir = scratch("features");
  const MelSpectrogram mel{3, {0.1, -2.5, 3.25, 1e-5, 7.0, -0.0}};
  write_features(dir / "a.mel", mel);
  const std::string bytes = slurp(dir / "a.mel");
  CHECK(bytes.size() == 16 + 6 * 4);
  CHECK(bytes.substr(0, 4) == "MELF");
  CHECK(read_features(dir / "a.mel") == to_float32(mel));

  std::string bad = bytes;
  bad[4] = 2;
  std::ofstream(dir / "v2.mel", std::ios::binary) << bad;
  CHECK_THROWS_AS(read_features(dir / "v2.mel"), DataError);
  std::ofstream(dir / "short.mel", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  CHECK_THROWS_AS(read_features(dir / "short.mel"), DataError);
  std::ofstream(dir / "junk.mel", std::ios::binary) << "JUNKJUNKJUNKJUNK";
  CHECK_THROWS_AS(read_features(dir / "junk.mel"), DataError);
  CHECK_THROWS_AS(read_features(dir / "missing.mel"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("number text parses back exactly") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> mantissa(-1.0, 1.0);
  std::uniform_int_distribution<int> exponent(-300, 300);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::ldexp(mantissa(rng), exponent(rng) / 3);
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.0) == "-2");
  CHECK(format_double(1e-9) == "1e-09");
}

TEST_CASE("loss log appends with one header") {
  const fs::path dir = scratch("losslog");
  {
    LossLog log(dir / "loss.csv");
    log.write(1, "total", 0.1);
  }
  {
    LossLog log(dir / "loss.csv");
    log.write(2, "total", 1.0 / 3.0);
  }
  CHECK(slurp(dir / "loss.csv") == "step,term,value\n1,total,0.1\n2,total,0.3333333333333333\n");
  fs::remove_all(dir);
}

TEST_CASE("checkpoint round trip restores the full state") {
  const fs::path dir = scratch("checkpoint");
  RunConfig cfg = tiny_run();
  const ExperimentData data = tiny_data(cfg);
  TrainState state = new_train_state(cfg, data.vocab);
  train_step(data.partition, state, cfg.training);
  save_checkpoint(dir / "ck.bin", state, cfg, data.vocab);
  Checkpoint ck = load_checkpoint(dir / "ck.bin");
  CHECK(ck.vocab == data.vocab);
  CHECK(format_config(ck.config) == format_config(cfg));
  CHECK(ck.state.step() == 1);
  const ParameterList a = state.model.named_parameters(), b = ck.state.model.named_parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::vector<double>(a[i].tensor.data().begin(), a[i].tensor.data().end()) ==
          std::vector<double>(b[i].tensor.data().begin(), b[i].tensor.data().end()));
    CHECK(state.optimizer.first_moment[i] == ck.state.optimizer.first_moment[i]);
    CHECK(state.optimizer.second_moment[i] == ck.state.optimizer.second_moment[i]);
  }
  CHECK(state.rng == ck.state.rng);
  // Continuing from either gives identical reports.
  for (int i = 0; i < 2; ++i)
    CHECK(train_step(data.partition, state, cfg.training).entries() ==
          train_step(data.partition, ck.state, cfg.training).entries());

  const std::string bytes = slurp(dir / "ck.bin");
  std::string wrong_version = bytes;
  wrong_version[4] = 9;
  std::ofstream(dir / "v9.bin", std::ios::binary) << wrong_version;
  try {
    load_checkpoint(dir / "v9.bin");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("version 9") != std::string::npos);
  }
  std::ofstream(dir / "cut.bin", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  CHECK_THROWS_AS(load_checkpoint(dir / "cut.bin"), DataError);
  std::ofstream(dir / "junk.bin", std::ios::binary) << "nothing here";
  CHECK_THROWS_AS(load_checkpoint(dir / "junk.bin"), DataError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.bin"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("resumed training continues the loss log bit-identically") {
  const fs::path dir = scratch("resume");
  RunConfig cfg = tiny_run();
  const ExperimentData data = tiny_data(cfg);

  TrainState straight = new_train_state(cfg, data.vocab);
  run_training(straight, cfg, data, {dir / "straight", {}});

  RunConfig half = cfg;
  half.steps = 2;
  TrainState first = new_train_state(half, data.vocab);
  run_training(first, half, data, {dir / "resumed", {}});
  Checkpoint ck = load_checkpoint(dir / "resumed" / "checkpoint.bin");
  CHECK(ck.state.step() == 2);
  ck.config.steps = 4;
  run_training(ck.state, ck.config, data, {dir / "resumed", {}});

  const std::string a = slurp(dir / "straight" / "loss.csv"), b = slurp(dir / "resumed" / "loss.csv");
  CHECK(!a.empty());
  CHECK(a == b);
  CHECK(fs::exists(dir / "straight" / "config.txt"));
  CHECK(parse_config(slurp(dir / "straight" / "config.txt")).steps == 4);
  fs::remove_all(dir);
}

TEST_CASE("mask-probability sweep emits one row per setting") {
  const fs::path dir = scratch("sweep");
  RunConfig cfg = tiny_run();
  cfg.steps = 1;
  const ExperimentData data = tiny_data(cfg);
  const auto rows = run_sweep(SweepKind::MaskProb, cfg, data, {}, {});
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].setting == "maskprob_0.1");
  write_sweep_csv(dir / "sweep.csv", rows);
  std::istringstream lines(slurp(dir / "sweep.csv"));
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) ++n;
  CHECK(n == 6);
  CHECK(run_sweep(SweepKind::Ablation, cfg, data, {}, {}).size() == 4);
  CHECK_THROWS_AS(parse_sweep_kind("bogus"), ConfigError);
  fs::remove_all(dir);
}
