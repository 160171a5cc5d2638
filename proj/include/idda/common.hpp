// Copyright 2026 The idda-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef IDDA_COMMON_HPP
#define IDDA_COMMON_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace idda {

// ---------------------------------------------------------------------------
// Error taxonomy. Everything user-actionable derives from Error so the CLI
// can catch one type and exit nonzero with the message.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad configuration values (caps, budgets, degenerate specs).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

/// Bad runtime inputs (empty corpora, out-of-range indices, too-small splits).
class InputError : public Error {
 public:
  explicit InputError(const std::string& msg) : Error("input error: " + msg) {}
};

/// Filesystem problems, with the offending path in the message.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error("i/o error: " + msg) {}
};

/// Parallel files whose line counts disagree.
class AlignmentError : public Error {
 public:
  AlignmentError(std::size_t left, std::size_t right, const std::string& what)
      : Error("alignment error: " + what + " (" + std::to_string(left) + " vs " +
              std::to_string(right) + " lines)"),
        left_lines(left),
        right_lines(right) {}
  std::size_t left_lines;
  std::size_t right_lines;
};

/// Tensor shape disagreements (student/teacher config mismatch, bad grads).
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error("shape error: " + msg) {}
};

/// Non-finite values, named after the tensor where they appeared.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error("numeric error: " + msg) {}
};

/// Checkpoint format version the reader does not understand.
class VersionError : public Error {
 public:
  explicit VersionError(const std::string& msg) : Error("version error: " + msg) {}
};

/// Violated internal contract (registry regression, lost best model). Loud on
/// purpose: these indicate a bug, not bad input.
class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& msg) : Error("invariant violated: " + msg) {}
};

// ---------------------------------------------------------------------------
// Deterministic randomness. All draws go through Rng so results are identical
// across platforms and standard-library versions; std::uniform_int_distribution
// and friends are deliberately avoided (their output is implementation-defined).
// Named sub-seeds keep independent pipeline stages decoupled from each other.
// ---------------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t x);

/// Stable 64-bit hash of a label (FNV-1a).
std::uint64_t hash_label(std::string_view label);

/// Derives the seed for a named pipeline stage from a base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
  return splitmix64(base ^ hash_label(label));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, n). n must be positive.
  std::size_t next_below(std::size_t n);

  /// Uniform in [0, 1).
  double next_double();

  /// Uniform in [lo, hi).
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Standard normal via Box-Muller (pair cached).
  double next_normal();

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    if (items.size() < 2) return;
    for (std::size_t i = items.size() - 1; i > 0; --i) {
      std::size_t j = next_below(i + 1);
      std::swap(items[i], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Small string utilities shared across modules.
// ---------------------------------------------------------------------------

/// Splits on runs of ASCII whitespace; never yields empty tokens.
std::vector<std::string> split_whitespace(std::string_view text);

/// Joins tokens with single spaces.
std::string join_tokens(const std::vector<std::string>& tokens);

/// Splits a UTF-8 string into codepoint substrings. Invalid bytes are kept
/// as single-byte units rather than rejected.
std::vector<std::string> utf8_codepoints(std::string_view word);

/// Fixed-format float for logs and reports (no locale surprises).
std::string format_double(double value, int precision);

}  // namespace idda

#endif  // IDDA_COMMON_HPP
