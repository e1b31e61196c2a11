#include "dualspeech/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include "dualspeech/error.hpp"

namespace dualspeech {

namespace {

constexpr std::array<const char*, 4> kSpecialSymbols = {"<pad>", "<eos>", "<unk>", "<mask>"};

constexpr std::array<const char*, 39> kArpabet = {
    "AA", "AE", "AH", "AO", "AW", "AY", "B",  "CH", "D",  "DH", "EH", "ER", "EY",
    "F",  "G",  "HH", "IH", "IY", "JH", "K",  "L",  "M",  "N",  "NG", "OW", "OY",
    "P",  "R",  "S",  "SH", "T",  "TH", "UH", "UW", "V",  "W",  "Y",  "Z",  "ZH"};

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream is{std::string(s)};
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

PhonemeVocab::PhonemeVocab(const std::vector<std::string>& inventory) {
  for (const char* s : kSpecialSymbols) symbols_.emplace_back(s);
  symbols_.insert(symbols_.end(), inventory.begin(), inventory.end());
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    const bool inserted = index_.emplace(symbols_[i], static_cast<PhonemeId>(i)).second;
    DUALSPEECH_EXPECT(inserted, "duplicate phoneme symbol '" + symbols_[i] + "'");
  }
}

PhonemeVocab PhonemeVocab::arpabet() {
  return PhonemeVocab(std::vector<std::string>(kArpabet.begin(), kArpabet.end()));
}

PhonemeVocab PhonemeVocab::toy(std::size_t n) {
  std::vector<std::string> inventory;
  for (std::size_t i = 0; i < n; ++i) inventory.push_back("p" + std::to_string(i));
  return PhonemeVocab(inventory);
}

std::vector<std::string> PhonemeVocab::inventory() const {
  return {symbols_.begin() + static_cast<std::ptrdiff_t>(kNumSpecials), symbols_.end()};
}

std::optional<PhonemeId> PhonemeVocab::find(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

PhonemeId PhonemeVocab::id_or_unk(std::string_view symbol) const {
  return find(symbol).value_or(kUnk);
}

const std::string& PhonemeVocab::symbol(PhonemeId id) const {
  DUALSPEECH_EXPECT(id >= 0 && static_cast<std::size_t>(id) < symbols_.size(),
                    "phoneme id " + std::to_string(id) + " outside vocabulary of size " +
                        std::to_string(symbols_.size()));
  return symbols_[static_cast<std::size_t>(id)];
}

bool PhonemeVocab::is_content(PhonemeId id) const {
  return id >= static_cast<PhonemeId>(kNumSpecials) && static_cast<std::size_t>(id) < symbols_.size();
}

std::vector<std::string> ids_to_phonemes(const PhonemeSequence& ids, const PhonemeVocab& vocab) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (PhonemeId id : ids) out.push_back(vocab.symbol(id));
  return out;
}

PhonemeSequence phonemes_to_ids(const std::vector<std::string>& symbols, const PhonemeVocab& vocab) {
  PhonemeSequence out;
  out.reserve(symbols.size());
  for (const auto& s : symbols) {
    auto id = vocab.find(s);
    DUALSPEECH_EXPECT(id.has_value(), "unknown phoneme symbol '" + s + "'");
    out.push_back(*id);
  }
  return out;
}

PhonemeSequence ids_roundtrip(const PhonemeSequence& seq, const PhonemeVocab& vocab) {
  return phonemes_to_ids(ids_to_phonemes(seq, vocab), vocab);
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open lexicon file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

Lexicon Lexicon::parse(std::string_view contents) {
  Lexicon lex;
  std::istringstream is{std::string(contents)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError("lexicon line " + std::to_string(line_no) + ": expected WORD<TAB>PHONEMES");
    auto phonemes = split_ws(std::string_view(line).substr(tab + 1));
    if (phonemes.empty())
      throw DataError("lexicon line " + std::to_string(line_no) + ": empty pronunciation");
    lex.add(line.substr(0, tab), std::move(phonemes));
  }
  return lex;
}

void Lexicon::add(std::string word, std::vector<std::string> phonemes) {
  entries_[upper(word)] = std::move(phonemes);
}

const std::vector<std::string>* Lexicon::lookup(std::string_view word) const {
  auto it = entries_.find(upper(word));
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> Lexicon::letter_fallback(std::string_view word) {
  // Digraphs are matched first, left to right.
  static const std::array<std::pair<const char*, const char*>, 10> digraphs = {{
      {"ch", "CH"}, {"sh", "SH"}, {"th", "TH"}, {"ph", "F"}, {"ng", "NG"},
      {"ck", "K"}, {"ee", "IY"}, {"oo", "UW"}, {"qu", "K W"}, {"wh", "W"},
  }};
  static const std::array<const char*, 26> letters = {
      "AE", "B", "K", "D", "EH", "F", "G", "HH", "IH", "JH", "K", "L", "M",
      "N",  "AA", "P", "K", "R", "S", "T", "AH", "V", "W", "K S", "Y", "Z"};
  std::string w;
  for (char c : word) w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  std::vector<std::string> out;
  auto emit = [&out](const char* phones) {
    for (auto& p : split_ws(phones)) out.push_back(std::move(p));
  };
  for (std::size_t i = 0; i < w.size();) {
    bool matched = false;
    if (i + 1 < w.size()) {
      for (const auto& [pattern, phones] : digraphs) {
        if (w.compare(i, 2, pattern) == 0) {
          emit(phones);
          i += 2;
          matched = true;
          break;
        }
      }
    }
    if (matched) continue;
    const char c = w[i];
    if (c == 'y' && i > 0) {
      emit("IY");
    } else if (c >= 'a' && c <= 'z') {
      emit(letters[static_cast<std::size_t>(c - 'a')]);
    } else if (c != '\'') {
      out.emplace_back("<unk>");
    }
    ++i;
  }
  return out;
}

PhonemeSequence text_to_phonemes(std::string_view text, const Lexicon& lexicon,
                                 const PhonemeVocab& vocab) {
  std::string cleaned;
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc) || c == '\'')
      cleaned.push_back(static_cast<char>(std::tolower(uc)));
    else
      cleaned.push_back(' ');
  }
  PhonemeSequence out;
  for (const std::string& token : split_ws(cleaned)) {
    std::string word = token;
    // Leading/trailing apostrophes are quotation marks, not part of the word.
    while (!word.empty() && word.front() == '\'') word.erase(word.begin());
    while (!word.empty() && word.back() == '\'') word.pop_back();
    if (word.empty()) continue;
    const std::vector<std::string>* entry = lexicon.lookup(word);
    const std::vector<std::string> phones = entry ? *entry : Lexicon::letter_fallback(word);
    for (const auto& p : phones) out.push_back(vocab.id_or_unk(p));
  }
  out.push_back(PhonemeVocab::kEos);
  return out;
}

PhonemeSequence parse_phoneme_string(std::string_view text, const PhonemeVocab& vocab) {
  PhonemeSequence out = phonemes_to_ids(split_ws(text), vocab);
  out.push_back(PhonemeVocab::kEos);
  return out;
}

std::string format_phonemes(const PhonemeSequence& seq, const PhonemeVocab& vocab) {
  std::string out;
  for (PhonemeId id : seq) {
    if (id == PhonemeVocab::kEos || id == PhonemeVocab::kPad) continue;
    if (!out.empty()) out.push_back(' ');
    out += vocab.symbol(id);
  }
  return out;
}

}  // namespace dualspeech
