#include "dualspeech/experiment.hpp"

#include <fstream>

#include "dualspeech/error.hpp"
#include "dualspeech/formats.hpp"

namespace dualspeech {

ExperimentData load_experiment_data(const RunConfig& cfg) {
  if (cfg.corpus_dir.empty()) throw ConfigError("paths.corpus is not set");
  CorpusDir dir = load_corpus_dir(cfg.corpus_dir);
  return make_experiment_data(cfg, std::move(dir.vocab), std::move(dir.utterances));
}

ExperimentData make_experiment_data(const RunConfig& cfg, PhonemeVocab vocab, std::vector<Utterance> utterances) {
  ExperimentData data{std::move(vocab), std::move(utterances), {}};
  try {
    data.partition = split_dataset(data.utterances, cfg.split, cfg.split_seed);
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  return data;
}

TrainState new_train_state(RunConfig& cfg, const PhonemeVocab& vocab) {
  cfg.model.vocab_size = vocab.size();
  cfg.resolve();
  return init_train_state(cfg.model, cfg.adam, cfg.model_seed);
}

void run_training(TrainState& state, const RunConfig& cfg, const ExperimentData& data, const TrainOptions& options) {
  LossLog log;
  if (!options.output_dir.empty()) {
    std::filesystem::create_directories(options.output_dir);
    std::ofstream echo(options.output_dir / "config.txt");
    echo << format_config(cfg);
    log = LossLog(options.output_dir / "loss.csv");
  }
  auto checkpoint = [&] {
    if (!options.output_dir.empty())
      save_checkpoint(options.output_dir / "checkpoint.bin", state, cfg, data.vocab);
  };
  while (state.step() < cfg.steps) {
    const LossReport report = train_step(data.partition, state, cfg.training);
    const std::uint64_t step = state.step();
    if (log.is_open())
      for (const auto& [term, value] : report.entries()) log.write(step, term, value);
    if (options.on_step) options.on_step(step, report);
    if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && step < cfg.steps) checkpoint();
  }
  checkpoint();
}

std::vector<PhonemeSequence> recognize(const Model& model, const std::vector<const MelSpectrogram*>& mels,
                                       bool use_start, const DecodeLimits& limits) {
  return asr_transform(model, mels, DirectionTag::LeftToRight, use_start, limits).sequences;
}

PerSummary evaluate_asr(const Model& model, const std::vector<Utterance>& utterances, bool use_start,
                        const DecodeLimits& limits, std::size_t batch) {
  DUALSPEECH_EXPECT(batch > 0, "evaluate_asr: batch must be positive");
  std::vector<PhonemeSequence> refs, hyps;
  for (std::size_t i = 0; i < utterances.size(); i += batch) {
    std::vector<const MelSpectrogram*> mels;
    for (std::size_t k = i; k < std::min(utterances.size(), i + batch); ++k) {
      const Utterance& u = utterances[k];
      if (!u.paired()) throw DataError("evaluation utterance " + u.id + " lacks mel or transcript");
      mels.push_back(&*u.mel);
      refs.push_back(*u.text);
    }
    for (PhonemeSequence& s : recognize(model, mels, use_start, limits)) hyps.push_back(std::move(s));
  }
  return right_half_per(refs, hyps);
}

SweepKind parse_sweep_kind(const std::string& name) {
  if (name == "ablation") return SweepKind::Ablation;
  if (name == "paired") return SweepKind::Paired;
  if (name == "maskprob") return SweepKind::MaskProb;
  throw ConfigError("unknown sweep '" + name + "' (expected ablation, paired or maskprob)");
}

std::vector<SweepRow> run_sweep(SweepKind kind, const RunConfig& base, const ExperimentData& data,
                                const std::vector<double>& values, const TrainOptions& options) {
  struct Setting {
    std::string name;
    RunConfig cfg;
  };
  std::vector<Setting> settings;
  switch (kind) {
    case SweepKind::Ablation: {
      const std::vector<std::pair<std::string, AblationFlags>> ladder = {
          {"pair_only", {false, false, false}},
          {"dae", {true, false, false}},
          {"dae_dt", {true, true, false}},
          {"dae_dt_bsm", {true, true, true}}};
      for (const auto& [name, flags] : ladder) {
        RunConfig c = base;
        c.training.ablation = flags;
        settings.push_back({name, c});
      }
      break;
    }
    case SweepKind::Paired:
      for (double v : values.empty() ? std::vector<double>{100, 200, 500} : values) {
        RunConfig c = base;
        c.split.paired = static_cast<std::size_t>(v);
        settings.push_back({"paired_" + std::to_string(c.split.paired), c});
      }
      break;
    case SweepKind::MaskProb:
      for (double v : values.empty() ? std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5} : values) {
        RunConfig c = base;
        c.training.corruption.mask_prob = v;
        settings.push_back({"maskprob_" + format_double(v), c});
      }
      break;
  }

  std::vector<SweepRow> rows;
  for (Setting& s : settings) {
    s.cfg.validate();
    const ExperimentData* run_data = &data;
    ExperimentData resplit;
    if (kind == SweepKind::Paired) {
      resplit = make_experiment_data(s.cfg, data.vocab, data.utterances);
      run_data = &resplit;
    }
    TrainState state = new_train_state(s.cfg, data.vocab);
    TrainOptions run_options = options;
    if (!options.output_dir.empty()) run_options.output_dir = options.output_dir / s.name;
    run_training(state, s.cfg, *run_data, run_options);
    rows.push_back({s.name, evaluate_asr(state.model, run_data->partition.test, s.cfg.training.ablation.bsm,
                                         s.cfg.training.limits)});
  }
  return rows;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "setting,per,left_per,right_per,substitutions,deletions,insertions,reference_length\n";
  for (const SweepRow& r : rows)
    out << r.setting << ',' << format_double(r.per.overall.per()) << ',' << format_double(r.per.left.per()) << ','
        << format_double(r.per.right.per()) << ',' << r.per.overall.substitutions << ',' << r.per.overall.deletions
        << ',' << r.per.overall.insertions << ',' << r.per.overall.reference_length << '\n';
}

}  // namespace dualspeech
