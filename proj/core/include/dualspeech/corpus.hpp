#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dualspeech/dsp.hpp"
#include "dualspeech/modality.hpp"
#include "dualspeech/text.hpp"

namespace dualspeech {

struct Utterance {
  std::string id;
  std::optional<MelSpectrogram> mel;
  std::optional<PhonemeSequence> text;  // EOS-terminated

  bool paired() const { return mel.has_value() && text.has_value(); }
};

struct SplitConfig {
  std::size_t train = 12500;
  std::size_t val = 300;
  std::size_t test = 300;
  std::size_t paired = 200;
  // Draw unpaired speech and unpaired text from disjoint halves of the
  // unpaired training utterances instead of from all of them.
  bool disjoint_halves = false;
};

/// Train/val/test split. Unpaired training utterances contribute their audio
/// to `speech` and their transcript to `text`; val/test keep both.
struct CorpusPartition {
  std::vector<Utterance> paired;
  std::vector<Utterance> speech;  // mel only
  std::vector<Utterance> text;    // transcript only
  std::vector<Utterance> val;
  std::vector<Utterance> test;

  std::size_t unpaired_size() const { return std::max(speech.size(), text.size()); }
};

/// Deterministic shuffle, then the first `train` utterances form the
/// training set (its first `paired` kept paired), the next `val` and `test`.
CorpusPartition split_dataset(const std::vector<Utterance>& all, const SplitConfig& cfg,
                              std::uint64_t seed);

/// How many times each paired example is repeated so the paired pool is about
/// as large as the unpaired one: max(1, ceil(unpaired / paired)).
std::size_t upsample_factor(const CorpusPartition& partition);
/// One weight per paired example (all equal to the factor).
std::vector<std::size_t> upsample_paired(const CorpusPartition& partition);

enum class LossKind { Dae, Dt, Sup };
const char* to_string(LossKind kind);

/// For dual transformation: whether the generated source was decoded in the
/// group's own direction or in the opposite one (then reversed).
enum class DtSource { None, Same, Cross };

/// One loss term of the training objective: which model is trained, in which
/// direction, from what kind of data.
struct GroupSpec {
  LossKind kind;
  Domain target;  // domain the decoder generates
  DirectionTag dir;
  DtSource dt_source = DtSource::None;

  std::string name() const;
  bool operator==(const GroupSpec&) const = default;
};

struct AblationFlags {
  bool dae = true;
  bool dt = true;
  bool bsm = true;
};

/// The loss terms one step evaluates. Full system: 4 DAE, 8 DT, 4 supervised.
/// Without BSM only left-to-right terms remain (and DT keeps only its
/// same-direction variant); disabled components drop their groups.
std::vector<GroupSpec> plan_groups(const AblationFlags& flags);

/// Concrete draw for one group: indices into the pool it samples from.
struct BatchGroup {
  GroupSpec spec;
  std::vector<std::size_t> items;
};

struct BatchPlan {
  std::vector<BatchGroup> groups;
  std::size_t group_size = 0;
  std::size_t total_sequences() const;
  std::size_t count(LossKind kind) const;
};

/// Sample every planned group (uniformly with replacement) from its pool.
/// Supervised groups sample the upsampled paired pool. Throws when a needed
/// pool is empty.
BatchPlan make_batch(const CorpusPartition& partition, const std::vector<GroupSpec>& groups,
                     std::size_t group_size, std::mt19937_64& rng);

/// Zero-padded batch of mels, optionally time-reversed.
SpeechBatch speech_batch(const std::vector<const MelSpectrogram*>& mels, bool reversed = false);
/// PAD-padded batch of phoneme sequences, optionally content-reversed.
TextBatch text_batch(const std::vector<const PhonemeSequence*>& seqs, bool reversed = false);

// Manifest: "id<TAB>wav_path<TAB>transcript" lines. Corpus directories hold
// manifest.tsv, vocab.txt and features/<id>.mel.
struct ManifestEntry {
  std::string id;
  std::string wav_path;
  std::string transcript;
};
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

struct CorpusDir {
  PhonemeVocab vocab;
  std::vector<Utterance> utterances;
};
/// Loads features/<id>.mel and the transcript (a phoneme string in `vocab`).
CorpusDir load_corpus_dir(const std::filesystem::path& dir);
void save_corpus_dir(const std::filesystem::path& dir, const PhonemeVocab& vocab,
                     const std::vector<Utterance>& utterances);

// Synthetic corpus: each phoneme has a fixed smooth bump pattern over the
// mel bins, repeated for a few frames, plus Gaussian noise. Transcripts
// follow a sparse bigram grammar so that text has learnable structure.
struct ToySpec {
  std::size_t inventory = 20;
  std::size_t frames_per_phoneme = 4;
  std::size_t n_mels = 80;
  double noise = 0.1;
  double amplitude = 3.0;
  double width = 2.5;  // bump standard deviation in bins
  std::size_t min_length = 5;
  std::size_t max_length = 20;
  std::size_t successors = 3;  // likely next phonemes per phoneme
  std::size_t count = 1000;

  void validate() const;
};

struct ToyCorpus {
  PhonemeVocab vocab;
  std::vector<std::vector<double>> patterns;  // per inventory symbol, n_mels values
  std::vector<Utterance> utterances;          // all with ground-truth mel and text
};

/// Pattern for inventory symbol k (0-based, not the vocab id).
std::vector<double> toy_pattern(const ToySpec& spec, std::size_t k);
/// Smallest L2 distance between any two patterns.
double min_pattern_distance(const ToySpec& spec);
/// Throws ContractViolation when patterns are not separated by more than
/// 4 * noise * sqrt(n_mels).
ToyCorpus synthesize_toy_corpus(const ToySpec& spec, std::uint64_t seed);
/// Mel for a phoneme sequence without noise.
MelSpectrogram render_toy_mel(const ToySpec& spec, const PhonemeSequence& seq);

}  // namespace dualspeech
