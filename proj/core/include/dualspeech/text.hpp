#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dualspeech {

using PhonemeId = std::int32_t;
using PhonemeSequence = std::vector<PhonemeId>;

/// Dense id <-> symbol map. Ids 0..3 are the specials PAD, EOS, UNK, MASK;
/// inventory symbols follow in the order given.
class PhonemeVocab {
 public:
  static constexpr PhonemeId kPad = 0;
  static constexpr PhonemeId kEos = 1;
  static constexpr PhonemeId kUnk = 2;
  static constexpr PhonemeId kMask = 3;
  static constexpr std::size_t kNumSpecials = 4;

  PhonemeVocab() = default;
  explicit PhonemeVocab(const std::vector<std::string>& inventory);

  /// The 39 stress-free ARPAbet phonemes.
  static PhonemeVocab arpabet();
  /// Synthetic inventory "p0" .. "p{n-1}".
  static PhonemeVocab toy(std::size_t n);

  std::size_t size() const { return symbols_.size(); }
  std::size_t inventory_size() const { return symbols_.size() - kNumSpecials; }
  const std::vector<std::string>& symbols() const { return symbols_; }
  /// Inventory symbols without specials.
  std::vector<std::string> inventory() const;

  std::optional<PhonemeId> find(std::string_view symbol) const;
  PhonemeId id_or_unk(std::string_view symbol) const;
  /// Throws ContractViolation for ids outside [0, size()).
  const std::string& symbol(PhonemeId id) const;
  bool is_content(PhonemeId id) const;

  bool operator==(const PhonemeVocab& other) const { return symbols_ == other.symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, PhonemeId> index_;
};

std::vector<std::string> ids_to_phonemes(const PhonemeSequence& ids, const PhonemeVocab& vocab);
PhonemeSequence phonemes_to_ids(const std::vector<std::string>& symbols, const PhonemeVocab& vocab);
/// phonemes_to_ids(ids_to_phonemes(seq)); throws on invalid ids.
PhonemeSequence ids_roundtrip(const PhonemeSequence& seq, const PhonemeVocab& vocab);

/// Word -> phoneme lookup with a deterministic letter-to-sound fallback.
class Lexicon {
 public:
  Lexicon() = default;

  /// Lines "WORD<TAB>PH1 PH2 ..."; '#' starts a comment line.
  static Lexicon load(const std::filesystem::path& path);
  static Lexicon parse(std::string_view contents);

  void add(std::string word, std::vector<std::string> phonemes);
  std::size_t size() const { return entries_.size(); }
  const std::vector<std::string>* lookup(std::string_view word) const;

  /// Letter-rule expansion; letters without a rule yield "<unk>".
  static std::vector<std::string> letter_fallback(std::string_view word);

 private:
  std::unordered_map<std::string, std::vector<std::string>> entries_;
};

/// Lowercase, strip punctuation, look each token up (fallback for OOV words)
/// and append EOS.
PhonemeSequence text_to_phonemes(std::string_view text, const Lexicon& lexicon,
                                 const PhonemeVocab& vocab);

/// Whitespace-separated symbols already in the vocabulary (toy corpora), EOS
/// appended.
PhonemeSequence parse_phoneme_string(std::string_view text, const PhonemeVocab& vocab);
/// Content symbols joined by spaces; EOS and PAD are dropped.
std::string format_phonemes(const PhonemeSequence& seq, const PhonemeVocab& vocab);

}  // namespace dualspeech
