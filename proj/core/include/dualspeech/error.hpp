#pragma once

#include <stdexcept>
#include <string>

namespace dualspeech {

// A caller broke a documented precondition (bad shape, out-of-range id, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Broken internal invariant, e.g. a cycle in the gradient graph.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing/malformed input files, unsupported encodings, version mismatches.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss during training. `term` names the offending loss term.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& term, const std::string& what)
      : std::runtime_error(what), term_(term) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

#define DUALSPEECH_EXPECT(cond, msg)                                      \
  do {                                                                    \
    if (!(cond)) throw ::dualspeech::ContractViolation(std::string(msg)); \
  } while (0)

}  // namespace dualspeech
