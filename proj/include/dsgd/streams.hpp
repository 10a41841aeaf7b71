#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dsgd/example.hpp"

namespace dsgd {

/// MurmurHash3 x86_32 (public domain reference algorithm).
std::uint32_t murmur3_32(std::string_view key, std::uint32_t seed);

struct HashConfig {
  int bits = 18;
  bool signed_hash = true;
  std::uint64_t seed = 0;

  std::size_t bins() const { return std::size_t{1} << bits; }
  void validate() const;
};

/// Running counters for feature extraction.
struct FeatureStats {
  std::uint64_t truncated_examples = 0;
};

/// Splits on runs of whitespace. No case folding.
std::vector<std::string> tokenize(std::string_view text);

/// Bin of a token: murmur3(token, seed32) mod 2^bits, with
/// seed32 = low 32 bits of seed xor high 32 bits.
std::size_t hash_index(std::string_view token, const HashConfig& cfg);
/// +1 or -1 from the top bit of murmur3(token, seed32 + 1); always +1 when
/// the config is unsigned.
double hash_sign(std::string_view token, const HashConfig& cfg);

/// Hashed bag of tokens; collisions add, zero-sum bins are dropped.
SparseVector hash_features(std::span<const std::string> tokens, const HashConfig& cfg);

/// Pair separator used for quadratic features (ASCII unit separator).
inline constexpr char kPairSeparator = '\x1f';
inline constexpr std::size_t kDefaultPairTokenCap = 256;

/// Linear features plus one hashed feature per unordered pair of distinct
/// positions i < j, keyed "tok_i SEP tok_j". Only the first `token_cap`
/// tokens form pairs; truncation bumps stats->truncated_examples.
SparseVector quadratic_features(std::span<const std::string> tokens, const HashConfig& cfg,
                                std::size_t token_cap = kDefaultPairTokenCap, FeatureStats* stats = nullptr);

/// Seeded Fisher-Yates permutation.
std::vector<SparseExample> permute(std::span<const SparseExample> stream, std::uint64_t seed);
std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed);

/// Each example repeated tau times in a row (the worst case for delay).
std::vector<SparseExample> adversarial_replicate(std::span<const SparseExample> stream, std::uint64_t tau);

struct SyntheticParams {
  enum class Kind { quadratic_iid, linear_margin_iid, correlated_blocks };

  Kind kind = Kind::linear_margin_iid;
  std::size_t dim = 16;
  std::size_t count = 1000;
  /// quadratic_iid: centers c_t lie in the ball of this radius around `center`.
  double radius = 1.0;
  std::vector<double> center;
  /// quadratic_iid: draw every coordinate of c_t - center from {-r, +r}/sqrt(d).
  bool sign_cloud = false;
  /// linear_margin_iid / correlated_blocks: nonzeros per example and |z|.
  std::size_t nnz = 4;
  double z_norm = 1.0;
  /// Probability of flipping the label of the hidden linear rule.
  double label_noise = 0.05;
  /// correlated_blocks: consecutive examples sharing support and label.
  std::size_t block = 8;

  void validate() const;
};

/// quadratic_iid: label +1, features c_t (loss centered_quadratic).
/// linear_margin_iid: labels from a hidden rule on random sparse z, |z| = z_norm.
/// correlated_blocks: like linear_margin_iid, in blocks of shared support.
std::vector<SparseExample> synthetic_stream(const SyntheticParams& params, std::uint64_t seed);

/// A labelled raw document.
struct LabeledText {
  double label = 1.0;
  std::string text;
};

struct CorpusReadResult {
  std::vector<LabeledText> documents;
  std::uint64_t malformed = 0;
};

/// Reads `<label>\t<text>` lines; labels -1, +1, 1 and 0 (mapped to -1).
/// Blank lines are ignored; other unparseable lines are counted and skipped.
/// Throws DomainError if the file cannot be opened.
CorpusReadResult read_corpus(const std::filesystem::path& path);
/// Parses corpus text already in memory.
CorpusReadResult parse_corpus(std::string_view content);

enum class FeatureKind { linear, quadratic };

std::vector<SparseExample> featurize(std::span<const LabeledText> docs, const HashConfig& cfg, FeatureKind kind,
                                     std::size_t pair_token_cap = kDefaultPairTokenCap,
                                     FeatureStats* stats = nullptr);

/// Text-like corpus generator: Zipfian background vocabulary plus a set of
/// class-indicative words per label, with label noise.
struct TextCorpusParams {
  std::size_t documents = 50000;
  std::size_t vocabulary = 20000;
  std::size_t indicative = 400;   // words per class that carry signal
  double signal_rate = 0.15;      // probability that a token is indicative
  std::size_t min_length = 20;
  std::size_t max_length = 60;
  double label_noise = 0.03;
  double positive_rate = 0.5;

  void validate() const;
};

std::vector<LabeledText> synthetic_corpus(const TextCorpusParams& params, std::uint64_t seed);

}  // namespace dsgd
