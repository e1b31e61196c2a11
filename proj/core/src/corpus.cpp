#include "dualspeech/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dualspeech/error.hpp"
#include "dualspeech/formats.hpp"

namespace dualspeech {

CorpusPartition split_dataset(const std::vector<Utterance>& all, const SplitConfig& cfg,
                              std::uint64_t seed) {
  DUALSPEECH_EXPECT(cfg.train + cfg.val + cfg.test <= all.size(),
                    "split_dataset: need " + std::to_string(cfg.train + cfg.val + cfg.test) +
                        " utterances, have " + std::to_string(all.size()));
  DUALSPEECH_EXPECT(cfg.paired <= cfg.train, "split_dataset: more paired than training utterances");
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  // Fisher-Yates with explicit draws so the order does not depend on the
  // standard library's shuffle.
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

  CorpusPartition p;
  const std::size_t unpaired = cfg.train - cfg.paired;
  const std::size_t speech_end = cfg.paired + (cfg.disjoint_halves ? unpaired / 2 : unpaired);
  const std::size_t text_begin = cfg.disjoint_halves ? speech_end : cfg.paired;
  for (std::size_t i = 0; i < cfg.train + cfg.val + cfg.test; ++i) {
    const Utterance& u = all[order[i]];
    if (i < cfg.paired) {
      DUALSPEECH_EXPECT(u.paired(), "split_dataset: paired utterance " + u.id + " lacks mel or text");
      p.paired.push_back(u);
      continue;
    }
    if (i < cfg.train) {
      if (i < speech_end && u.mel) p.speech.push_back(Utterance{u.id, u.mel, std::nullopt});
      if (i >= text_begin && u.text) p.text.push_back(Utterance{u.id, std::nullopt, u.text});
    } else if (i < cfg.train + cfg.val) {
      p.val.push_back(u);
    } else {
      p.test.push_back(u);
    }
  }
  return p;
}

std::size_t upsample_factor(const CorpusPartition& partition) {
  DUALSPEECH_EXPECT(!partition.paired.empty(), "upsample_paired: no paired data");
  const std::size_t n = partition.paired.size();
  return std::max<std::size_t>(1, (partition.unpaired_size() + n - 1) / n);
}

std::vector<std::size_t> upsample_paired(const CorpusPartition& partition) {
  return std::vector<std::size_t>(partition.paired.size(), upsample_factor(partition));
}

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Dae: return "dae";
    case LossKind::Dt: return "dt";
    case LossKind::Sup: return "sup";
  }
  return "?";
}

std::string GroupSpec::name() const {
  std::string out = std::string(to_string(kind)) + "_" + (target == Domain::Speech ? "tts" : "asr");
  if (kind == LossKind::Dae) out = std::string("dae_") + to_string(target);
  out += dir == DirectionTag::LeftToRight ? "_l2r" : "_r2l";
  if (dt_source == DtSource::Cross) out += "_cross";
  return out;
}

std::vector<GroupSpec> plan_groups(const AblationFlags& flags) {
  std::vector<DirectionTag> dirs = {DirectionTag::LeftToRight};
  if (flags.bsm) dirs.push_back(DirectionTag::RightToLeft);
  std::vector<GroupSpec> out;
  if (flags.dae)
    for (Domain d : {Domain::Speech, Domain::Text})
      for (DirectionTag dir : dirs) out.push_back({LossKind::Dae, d, dir});
  if (flags.dt)
    for (DirectionTag dir : dirs)
      for (Domain d : {Domain::Speech, Domain::Text}) {
        out.push_back({LossKind::Dt, d, dir, DtSource::Same});
        if (flags.bsm) out.push_back({LossKind::Dt, d, dir, DtSource::Cross});
      }
  for (DirectionTag dir : dirs)
    for (Domain d : {Domain::Speech, Domain::Text}) out.push_back({LossKind::Sup, d, dir});
  return out;
}

std::size_t BatchPlan::total_sequences() const {
  std::size_t n = 0;
  for (auto& g : groups) n += g.items.size();
  return n;
}

std::size_t BatchPlan::count(LossKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(groups.begin(), groups.end(), [&](auto& g) { return g.spec.kind == kind; }));
}

BatchPlan make_batch(const CorpusPartition& partition, const std::vector<GroupSpec>& groups,
                     std::size_t group_size, std::mt19937_64& rng) {
  DUALSPEECH_EXPECT(group_size > 0, "make_batch: group size must be positive");
  BatchPlan plan;
  plan.group_size = group_size;
  for (const GroupSpec& spec : groups) {
    std::size_t pool = 0;
    if (spec.kind == LossKind::Sup) {
      // Upsampling repeats every paired example equally often, so a uniform
      // draw over the repeated pool is a uniform draw over the paired set.
      pool = partition.paired.size() * (partition.paired.empty() ? 0 : upsample_factor(partition));
    } else {
      pool = spec.target == Domain::Speech ? partition.speech.size() : partition.text.size();
    }
    DUALSPEECH_EXPECT(pool > 0, std::string("make_batch: empty pool for group ") + spec.name());
    BatchGroup g{spec, {}};
    for (std::size_t i = 0; i < group_size; ++i) {
      std::size_t idx = static_cast<std::size_t>(rng() % pool);
      if (spec.kind == LossKind::Sup) idx %= partition.paired.size();
      g.items.push_back(idx);
    }
    plan.groups.push_back(std::move(g));
  }
  return plan;
}

SpeechBatch speech_batch(const std::vector<const MelSpectrogram*>& mels, bool reversed) {
  DUALSPEECH_EXPECT(!mels.empty(), "speech_batch: empty batch");
  const std::size_t n_mels = mels.front()->n_mels;
  std::size_t time = 0;
  for (auto* m : mels) {
    DUALSPEECH_EXPECT(m->n_mels == n_mels, "speech_batch: mixed mel widths");
    DUALSPEECH_EXPECT(m->n_frames() >= 1, "speech_batch: empty spectrogram");
    time = std::max(time, m->n_frames());
  }
  SpeechBatch out;
  std::vector<double> data(mels.size() * time * n_mels, 0.0);
  for (std::size_t b = 0; b < mels.size(); ++b) {
    const std::size_t len = mels[b]->n_frames();
    out.lengths.push_back(len);
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t src = reversed ? len - 1 - t : t;
      std::copy_n(mels[b]->values.begin() + static_cast<std::ptrdiff_t>(src * n_mels), n_mels,
                  data.begin() + static_cast<std::ptrdiff_t>((b * time + t) * n_mels));
    }
  }
  out.frames = Tensor::from({mels.size(), time, n_mels}, std::move(data));
  return out;
}

TextBatch text_batch(const std::vector<const PhonemeSequence*>& seqs, bool reversed) {
  DUALSPEECH_EXPECT(!seqs.empty(), "text_batch: empty batch");
  TextBatch out;
  for (auto* s : seqs) {
    DUALSPEECH_EXPECT(!s->empty(), "text_batch: empty sequence");
    out.time = std::max(out.time, s->size());
  }
  out.ids.assign(seqs.size() * out.time, PhonemeVocab::kPad);
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    const PhonemeSequence& s = *seqs[b];
    out.lengths.push_back(s.size());
    std::copy(s.begin(), s.end(), out.ids.begin() + static_cast<std::ptrdiff_t>(b * out.time));
    if (reversed) {
      // Content only: a trailing EOS stays last.
      auto first = out.ids.begin() + static_cast<std::ptrdiff_t>(b * out.time);
      auto last = first + static_cast<std::ptrdiff_t>(s.size());
      if (s.back() == PhonemeVocab::kEos) --last;
      std::reverse(first, last);
    }
  }
  return out;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto a = line.find('\t');
    const auto b = a == std::string::npos ? a : line.find('\t', a + 1);
    if (b == std::string::npos)
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected id<TAB>wav<TAB>transcript");
    out.push_back({line.substr(0, a), line.substr(a + 1, b - a - 1), line.substr(b + 1)});
    if (out.back().id.empty()) throw DataError(path.string() + ":" + std::to_string(lineno) + ": empty id");
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  for (auto& e : entries) out << e.id << '\t' << e.wav_path << '\t' << e.transcript << '\n';
}

CorpusDir load_corpus_dir(const std::filesystem::path& dir) {
  CorpusDir out;
  std::ifstream vocab_in(dir / "vocab.txt");
  if (!vocab_in) throw DataError("cannot open " + (dir / "vocab.txt").string());
  std::vector<std::string> symbols;
  std::string sym;
  while (vocab_in >> sym) symbols.push_back(sym);
  const std::vector<std::string> specials = PhonemeVocab(std::vector<std::string>{}).symbols();
  if (symbols.size() < specials.size() || !std::equal(specials.begin(), specials.end(), symbols.begin()))
    throw DataError((dir / "vocab.txt").string() + ": must start with the special symbols");
  out.vocab = PhonemeVocab({symbols.begin() + static_cast<std::ptrdiff_t>(specials.size()), symbols.end()});
  for (const ManifestEntry& e : read_manifest(dir / "manifest.tsv")) {
    Utterance u;
    u.id = e.id;
    const auto feat = dir / "features" / (e.id + ".mel");
    if (std::filesystem::exists(feat)) u.mel = read_features(feat);
    try {
      u.text = parse_phoneme_string(e.transcript, out.vocab);
    } catch (const ContractViolation& err) {
      throw DataError("utterance " + e.id + ": " + err.what());
    }
    out.utterances.push_back(std::move(u));
  }
  return out;
}

void save_corpus_dir(const std::filesystem::path& dir, const PhonemeVocab& vocab,
                     const std::vector<Utterance>& utterances) {
  std::filesystem::create_directories(dir / "features");
  {
    std::ofstream v(dir / "vocab.txt");
    if (!v) throw DataError("cannot write " + (dir / "vocab.txt").string());
    for (auto& s : vocab.symbols()) v << s << '\n';
  }
  std::vector<ManifestEntry> entries;
  for (const Utterance& u : utterances) {
    if (u.mel) write_features(dir / "features" / (u.id + ".mel"), *u.mel);
    entries.push_back({u.id, "-", u.text ? format_phonemes(*u.text, vocab) : ""});
  }
  write_manifest(dir / "manifest.tsv", entries);
}

}  // namespace dualspeech
