#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dualspeech/text.hpp"

namespace dualspeech::testing {

// Edit distance by plain recursion over suffixes with memoization. Written
// independently of the library's bottom-up table.
class EditOracle {
 public:
  std::size_t distance(const PhonemeSequence& a, const PhonemeSequence& b) {
    a_ = &a;
    b_ = &b;
    for (auto& row : memo_) row.fill(-1);
    return static_cast<std::size_t>(solve(0, 0));
  }

 private:
  int solve(std::size_t i, std::size_t j) {
    if (i == a_->size()) return static_cast<int>(b_->size() - j);
    if (j == b_->size()) return static_cast<int>(a_->size() - i);
    int& m = memo_[i][j];
    if (m >= 0) return m;
    int best = solve(i + 1, j + 1) + ((*a_)[i] == (*b_)[j] ? 0 : 1);
    best = std::min(best, solve(i + 1, j) + 1);
    best = std::min(best, solve(i, j + 1) + 1);
    return m = best;
  }

  const PhonemeSequence* a_ = nullptr;
  const PhonemeSequence* b_ = nullptr;
  std::array<std::array<int, 16>, 16> memo_{};
};

// Every sequence over {0, .., alphabet-1} with length <= max_len.
inline std::vector<PhonemeSequence> all_sequences(std::size_t max_len, PhonemeId alphabet) {
  std::vector<PhonemeSequence> out{{}};
  std::size_t begin = 0;
  for (std::size_t len = 1; len <= max_len; ++len) {
    const std::size_t end = out.size();
    for (std::size_t k = begin; k < end; ++k)
      for (PhonemeId s = 0; s < alphabet; ++s) {
        PhonemeSequence next = out[k];
        next.push_back(s + 4);
        out.push_back(std::move(next));
      }
    begin = end;
  }
  return out;
}

}  // namespace dualspeech::testing
