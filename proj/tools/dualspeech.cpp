#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dualspeech/checkpoint.hpp"
#include "dualspeech/config.hpp"
#include "dualspeech/error.hpp"
#include "dualspeech/experiment.hpp"
#include "dualspeech/formats.hpp"

using namespace dualspeech;
namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kNumeric = 4 };

RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg = path.empty() ? RunConfig{} : load_config(path);
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

void print_per(const std::string& label, const PerSummary& s) {
  std::printf("%-12s %10s %10s %10s %8s\n", label.c_str(), "PER", "left", "right", "ref");
  std::printf("%-12s %10.4f %10.4f %10.4f %8zu\n", "", s.overall.per(), s.left.per(), s.right.per(),
              s.overall.reference_length);
}

int make_toy_corpus(const fs::path& out, const ToySpec& spec, std::uint64_t seed) {
  const ToyCorpus toy = synthesize_toy_corpus(spec, seed);
  save_corpus_dir(out, toy.vocab, toy.utterances);
  std::printf("wrote %zu utterances to %s\n", toy.utterances.size(), out.string().c_str());
  return kOk;
}

int prepare(const fs::path& manifest, const fs::path& out, const fs::path& lexicon_path, const RunConfig& cfg) {
  const Lexicon lexicon = Lexicon::load(lexicon_path);
  const PhonemeVocab vocab = PhonemeVocab::arpabet();
  const MelFilterbank fb(cfg.stft, cfg.model.n_mels);
  std::vector<Utterance> utterances;
  for (const ManifestEntry& e : read_manifest(manifest)) {
    Utterance u{e.id, std::nullopt, std::nullopt};
    if (!e.wav_path.empty() && e.wav_path != "-") {
      fs::path wav = e.wav_path;
      if (wav.is_relative()) wav = manifest.parent_path() / wav;
      Waveform w = read_wav(wav);
      if (w.sample_rate != cfg.stft.sample_rate) w = resample(w, cfg.stft.sample_rate);
      if (w.samples.size() < cfg.stft.frame_length) throw DataError(wav.string() + ": shorter than one frame");
      u.mel = mel_spectrogram(w.samples, cfg.stft, fb);
    }
    if (!e.transcript.empty()) u.text = text_to_phonemes(e.transcript, lexicon, vocab);
    utterances.push_back(std::move(u));
  }
  save_corpus_dir(out, vocab, utterances);
  std::printf("prepared %zu utterances into %s\n", utterances.size(), out.string().c_str());
  return kOk;
}

int train(RunConfig cfg, const std::string& resume) {
  const ExperimentData data = load_experiment_data(cfg);
  TrainState state = [&] {
    if (resume.empty()) return new_train_state(cfg, data.vocab);
    Checkpoint ck = load_checkpoint(resume);
    if (!(ck.vocab == data.vocab)) throw DataError("checkpoint vocabulary differs from the corpus");
    const std::uint64_t steps = cfg.steps;
    const std::string output = cfg.output_dir;
    cfg = ck.config;
    cfg.steps = steps;
    cfg.output_dir = output;
    return std::move(ck.state);
  }();
  std::printf("training from step %llu to %llu, output %s\n", static_cast<unsigned long long>(state.step()),
              static_cast<unsigned long long>(cfg.steps), cfg.output_dir.c_str());
  TrainOptions options{cfg.output_dir, [&](std::uint64_t step, const LossReport& r) {
                         if (step % 100 == 0 || step == cfg.steps)
                           std::printf("step %llu total %.6g\n", static_cast<unsigned long long>(step), r.total);
                       }};
  run_training(state, cfg, data, options);
  return kOk;
}

PhonemeSequence input_text(const std::string& text, const std::string& phonemes, const fs::path& lexicon,
                           const PhonemeVocab& vocab) {
  if (!phonemes.empty()) {
    try {
      return parse_phoneme_string(phonemes, vocab);
    } catch (const ContractViolation& e) {
      throw DataError(e.what());
    }
  }
  if (text.empty()) throw ConfigError("one of --text or --phonemes is required");
  return text_to_phonemes(text, Lexicon::load(lexicon), vocab);
}

int synthesize(const fs::path& checkpoint, const PhonemeSequence& seq, const Checkpoint& ck, const fs::path& wav,
               const fs::path& pgm) {
  const RunConfig& cfg = ck.config;
  const SpeechDecode out =
      tts_transform(ck.state.model, {&seq}, DirectionTag::LeftToRight, cfg.training.ablation.bsm, cfg.training.limits);
  const MelSpectrogram& mel = out.mels.front();
  if (!pgm.empty()) render_spectrogram_image(mel, pgm);
  if (!wav.empty()) {
    const MelFilterbank fb(cfg.stft, cfg.model.n_mels);
    write_wav(wav, griffin_lim(mel, cfg.stft, fb, cfg.griffin_lim_iterations).wave);
  }
  std::printf("%zu frames%s from %s\n", mel.n_frames(), out.truncated.front() ? " (hit length cap)" : "",
              checkpoint.string().c_str());
  return kOk;
}

int recognize_cmd(const Checkpoint& ck, const fs::path& wav, const fs::path& features) {
  const RunConfig& cfg = ck.config;
  MelSpectrogram mel;
  if (!features.empty()) {
    mel = read_features(features);
  } else {
    Waveform w = read_wav(wav);
    if (w.sample_rate != cfg.stft.sample_rate) w = resample(w, cfg.stft.sample_rate);
    mel = mel_spectrogram(w.samples, cfg.stft, MelFilterbank(cfg.stft, cfg.model.n_mels));
  }
  if (mel.n_mels != cfg.model.n_mels) throw DataError("feature width does not match the model");
  const auto hyp = recognize(ck.state.model, {&mel}, cfg.training.ablation.bsm, cfg.training.limits);
  std::printf("%s\n", format_phonemes(hyp.front(), ck.vocab).c_str());
  return kOk;
}

int evaluate(const Checkpoint& ck, const std::string& corpus, const std::string& split, const fs::path& csv) {
  RunConfig cfg = ck.config;
  if (!corpus.empty()) cfg.corpus_dir = corpus;
  const ExperimentData data = load_experiment_data(cfg);
  if (!(data.vocab == ck.vocab)) throw DataError("checkpoint vocabulary differs from the corpus");
  const auto& utts = split == "val" ? data.partition.val : data.partition.test;
  const PerSummary s = evaluate_asr(ck.state.model, utts, cfg.training.ablation.bsm, cfg.training.limits);
  print_per(split, s);
  if (!csv.empty()) write_sweep_csv(csv, {{split, s}});
  return kOk;
}

int sweep(const std::string& which, const RunConfig& cfg, const std::vector<double>& values, const fs::path& csv) {
  const SweepKind kind = parse_sweep_kind(which);
  const ExperimentData data = load_experiment_data(cfg);
  const auto rows = run_sweep(kind, cfg, data, values, {fs::path(cfg.output_dir) / ("sweep_" + which), {}});
  for (const SweepRow& r : rows) print_per(r.setting, r.per);
  write_sweep_csv(csv.empty() ? fs::path(cfg.output_dir) / ("sweep_" + which + ".csv") : csv, rows);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speech/text dual training toolkit"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, text, phonemes, out_wav, out_pgm, wav, features, corpus, csv, resume;
  std::string manifest, out_dir, split = "test", lexicon = DUALSPEECH_DEFAULT_LEXICON;
  std::vector<std::string> overrides;
  std::vector<double> values;
  ToySpec toy;
  std::uint64_t seed = 1;
  std::string sweep_kind;

  auto* mk = app.add_subcommand("make-toy-corpus", "Write a synthetic corpus directory");
  mk->add_option("--out", out_dir, "Output directory")->required();
  mk->add_option("--count", toy.count, "Utterances");
  mk->add_option("--inventory", toy.inventory, "Phoneme inventory size");
  mk->add_option("--frames-per-phoneme", toy.frames_per_phoneme);
  mk->add_option("--noise", toy.noise, "Gaussian noise standard deviation");
  mk->add_option("--min-length", toy.min_length);
  mk->add_option("--max-length", toy.max_length);
  mk->add_option("--seed", seed);

  auto* prep = app.add_subcommand("prepare", "Extract mel features and phonemes from a manifest");
  prep->add_option("--manifest", manifest, "id<TAB>wav<TAB>transcript file")->required();
  prep->add_option("--out", out_dir, "Corpus directory")->required();
  prep->add_option("--lexicon", lexicon, "Pronunciation lexicon");
  prep->add_option("--config", config_path, "Run config (stft settings)");

  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--config", config_path, "Run config");
  tr->add_option("--set", overrides, "key=value override (repeatable)");
  tr->add_option("--resume", resume, "Checkpoint to continue from");

  auto* syn = app.add_subcommand("synthesize", "Text to mel, PGM and WAV");
  syn->add_option("--checkpoint", checkpoint)->required();
  syn->add_option("--text", text, "Plain text (lexicon lookup)");
  syn->add_option("--phonemes", phonemes, "Space-separated phoneme symbols");
  syn->add_option("--lexicon", lexicon);
  syn->add_option("--out-wav", out_wav);
  syn->add_option("--out-pgm", out_pgm);

  auto* rec = app.add_subcommand("recognize", "Speech to phonemes");
  rec->add_option("--checkpoint", checkpoint)->required();
  auto* rec_in = rec->add_option_group("input");
  rec_in->add_option("--wav", wav);
  rec_in->add_option("--features", features, "MELF feature file");
  rec_in->require_option(1);

  auto* ev = app.add_subcommand("evaluate", "PER on a corpus split");
  ev->add_option("--checkpoint", checkpoint)->required();
  ev->add_option("--corpus", corpus, "Corpus directory (default: from the checkpoint config)");
  ev->add_option("--split", split)->check(CLI::IsMember({"test", "val"}));
  ev->add_option("--csv", csv);

  auto* sw = app.add_subcommand("sweep", "Ablation ladder, paired-data or masking sweep");
  sw->add_option("which", sweep_kind, "ablation | paired | maskprob")->required();
  sw->add_option("--config", config_path, "Run config");
  sw->add_option("--set", overrides, "key=value override (repeatable)");
  sw->add_option("--values", values, "Paired counts or mask probabilities");
  sw->add_option("--csv", csv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*mk) return make_toy_corpus(out_dir, toy, seed);
    if (*prep) return prepare(manifest, out_dir, lexicon, resolve_config(config_path, {}));
    if (*tr) return train(resolve_config(config_path, overrides), resume);
    if (*syn) {
      const Checkpoint ck = load_checkpoint(checkpoint);
      return synthesize(checkpoint, input_text(text, phonemes, lexicon, ck.vocab), ck, out_wav, out_pgm);
    }
    if (*rec) return recognize_cmd(load_checkpoint(checkpoint), wav, features);
    if (*ev) return evaluate(load_checkpoint(checkpoint), corpus, split, csv);
    if (*sw) return sweep(sweep_kind, resolve_config(config_path, overrides), values, csv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error in " << e.term() << ": " << e.what() << '\n';
    return kNumeric;
  } catch (const ContractViolation& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
