#include "dsgd/streams.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "dsgd/errors.hpp"
#include "dsgd/random.hpp"

namespace dsgd {

namespace {

std::uint32_t rotl32(std::uint32_t x, int r) { return (x << r) | (x >> (32 - r)); }

std::uint32_t fmix32(std::uint32_t h) {
  h ^= h >> 16;
  h *= 0x85ebca6bU;
  h ^= h >> 13;
  h *= 0xc2b2ae35U;
  h ^= h >> 16;
  return h;
}

std::uint32_t fold_seed(std::uint64_t seed) {
  return static_cast<std::uint32_t>(seed) ^ static_cast<std::uint32_t>(seed >> 32);
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

}  // namespace

std::uint32_t murmur3_32(std::string_view key, std::uint32_t seed) {
  const auto* data = reinterpret_cast<const unsigned char*>(key.data());
  const std::size_t len = key.size();
  const std::size_t nblocks = len / 4;
  constexpr std::uint32_t c1 = 0xcc9e2d51U;
  constexpr std::uint32_t c2 = 0x1b873593U;
  std::uint32_t h = seed;

  for (std::size_t i = 0; i < nblocks; ++i) {
    // little-endian block read, independent of host byte order
    std::uint32_t k = static_cast<std::uint32_t>(data[4 * i]) | (static_cast<std::uint32_t>(data[4 * i + 1]) << 8) |
                      (static_cast<std::uint32_t>(data[4 * i + 2]) << 16) |
                      (static_cast<std::uint32_t>(data[4 * i + 3]) << 24);
    k *= c1;
    k = rotl32(k, 15);
    k *= c2;
    h ^= k;
    h = rotl32(h, 13);
    h = h * 5 + 0xe6546b64U;
  }

  const unsigned char* tail = data + nblocks * 4;
  std::uint32_t k = 0;
  switch (len & 3U) {
    case 3:
      k ^= static_cast<std::uint32_t>(tail[2]) << 16;
      [[fallthrough]];
    case 2:
      k ^= static_cast<std::uint32_t>(tail[1]) << 8;
      [[fallthrough]];
    case 1:
      k ^= tail[0];
      k *= c1;
      k = rotl32(k, 15);
      k *= c2;
      h ^= k;
  }

  h ^= static_cast<std::uint32_t>(len);
  return fmix32(h);
}

void HashConfig::validate() const {
  if (bits < 1 || bits > 30) throw DomainError("hash bits must lie in [1, 30]");
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::size_t hash_index(std::string_view token, const HashConfig& cfg) {
  return murmur3_32(token, fold_seed(cfg.seed)) & static_cast<std::uint32_t>(cfg.bins() - 1);
}

double hash_sign(std::string_view token, const HashConfig& cfg) {
  if (!cfg.signed_hash) return 1.0;
  return (murmur3_32(token, fold_seed(cfg.seed) + 1U) >> 31) != 0 ? -1.0 : 1.0;
}

namespace {

void add_token(std::vector<SparseEntry>& acc, std::string_view token, const HashConfig& cfg) {
  acc.push_back({hash_index(token, cfg), hash_sign(token, cfg)});
}

}  // namespace

SparseVector hash_features(std::span<const std::string> tokens, const HashConfig& cfg) {
  cfg.validate();
  std::vector<SparseEntry> acc;
  acc.reserve(tokens.size());
  for (const auto& tok : tokens) add_token(acc, tok, cfg);
  return SparseVector::from_unsorted(std::move(acc));
}

SparseVector quadratic_features(std::span<const std::string> tokens, const HashConfig& cfg, std::size_t token_cap,
                                FeatureStats* stats) {
  cfg.validate();
  std::size_t n = tokens.size();
  if (n > token_cap) {
    n = token_cap;
    if (stats != nullptr) ++stats->truncated_examples;
  }
  std::vector<SparseEntry> acc;
  acc.reserve(tokens.size() + n * (n - (n > 0 ? 1 : 0)) / 2);
  for (const auto& tok : tokens) add_token(acc, tok, cfg);
  std::string pair;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      pair.clear();
      pair.append(tokens[i]);
      pair.push_back(kPairSeparator);
      pair.append(tokens[j]);
      add_token(acc, pair, cfg);
    }
  }
  return SparseVector::from_unsorted(std::move(acc));
}

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = uniform_below(rng, i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::vector<SparseExample> permute(std::span<const SparseExample> stream, std::uint64_t seed) {
  std::vector<SparseExample> out;
  out.reserve(stream.size());
  for (std::size_t i : permutation(stream.size(), seed)) out.push_back(stream[i]);
  return out;
}

std::vector<SparseExample> adversarial_replicate(std::span<const SparseExample> stream, std::uint64_t tau) {
  if (tau == 0) throw DomainError("replication factor must be at least 1");
  std::vector<SparseExample> out;
  out.reserve(stream.size() * tau);
  for (const auto& ex : stream) {
    for (std::uint64_t k = 0; k < tau; ++k) out.push_back(ex);
  }
  return out;
}

void SyntheticParams::validate() const {
  if (dim == 0 || count == 0) throw DomainError("synthetic stream needs dim > 0 and count > 0");
  if (kind == Kind::quadratic_iid) {
    if (!(radius >= 0.0)) throw DomainError("quadratic_iid radius must be non-negative");
    if (!center.empty() && center.size() != dim) throw DomainError("quadratic_iid center must have dim entries");
    return;
  }
  if (nnz == 0 || nnz > dim) throw DomainError("nnz must lie in [1, dim]");
  if (!(z_norm > 0.0)) throw DomainError("z_norm must be positive");
  if (!(label_noise >= 0.0 && label_noise <= 0.5)) throw DomainError("label_noise must lie in [0, 0.5]");
  if (kind == Kind::correlated_blocks && block == 0) throw DomainError("block length must be positive");
}

namespace {

std::vector<std::size_t> sample_support(Rng& rng, std::size_t dim, std::size_t nnz) {
  std::vector<std::size_t> idx;
  idx.reserve(nnz);
  if (nnz * 4 >= dim) {
    std::vector<std::size_t> all(dim);
    for (std::size_t i = 0; i < dim; ++i) all[i] = i;
    for (std::size_t k = 0; k < nnz; ++k) {
      const std::size_t j = k + uniform_below(rng, dim - k);
      std::swap(all[k], all[j]);
      idx.push_back(all[k]);
    }
  } else {
    std::unordered_set<std::size_t> seen;
    while (idx.size() < nnz) {
      const std::size_t i = uniform_below(rng, dim);
      if (seen.insert(i).second) idx.push_back(i);
    }
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

SparseVector normalized(const std::vector<std::size_t>& idx, std::vector<double> values, double target) {
  double sq = 0.0;
  for (double v : values) sq += v * v;
  const double scale = sq > 0.0 ? target / std::sqrt(sq) : 0.0;
  std::vector<SparseEntry> entries;
  for (std::size_t k = 0; k < idx.size(); ++k) entries.push_back({idx[k], values[k] * scale});
  return SparseVector::from_unsorted(std::move(entries));
}

double label_for(const std::vector<double>& w, const SparseVector& z) {
  double m = 0.0;
  for (const auto& e : z.entries()) m += w[e.index] * e.value;
  return m >= 0.0 ? 1.0 : -1.0;
}

}  // namespace

std::vector<SparseExample> synthetic_stream(const SyntheticParams& p, std::uint64_t seed) {
  p.validate();
  Rng rng(seed);
  std::vector<SparseExample> out;
  out.reserve(p.count);

  if (p.kind == SyntheticParams::Kind::quadratic_iid) {
    const double d = static_cast<double>(p.dim);
    for (std::size_t t = 0; t < p.count; ++t) {
      std::vector<double> offset(p.dim);
      if (p.sign_cloud) {
        for (auto& v : offset) v = (uniform01(rng) < 0.5 ? -p.radius : p.radius) / std::sqrt(d);
      } else {
        double sq = 0.0;
        for (auto& v : offset) {
          v = standard_normal(rng);
          sq += v * v;
        }
        const double r = p.radius * std::pow(uniform01(rng), 1.0 / d);
        const double s = sq > 0.0 ? r / std::sqrt(sq) : 0.0;
        for (auto& v : offset) v *= s;
      }
      std::vector<SparseEntry> entries;
      for (std::size_t i = 0; i < p.dim; ++i) {
        const double c = (p.center.empty() ? 0.0 : p.center[i]) + offset[i];
        entries.push_back({i, c});
      }
      out.push_back({1.0, SparseVector::from_unsorted(std::move(entries))});
    }
    return out;
  }

  std::vector<double> w(p.dim);
  for (auto& v : w) v = standard_normal(rng);

  auto flip = [&](double y) { return uniform01(rng) < p.label_noise ? -y : y; };

  if (p.kind == SyntheticParams::Kind::linear_margin_iid) {
    for (std::size_t t = 0; t < p.count; ++t) {
      auto idx = sample_support(rng, p.dim, p.nnz);
      std::vector<double> vals(idx.size());
      for (auto& v : vals) v = standard_normal(rng);
      SparseVector z = normalized(idx, std::move(vals), p.z_norm);
      const double y = flip(label_for(w, z));
      out.push_back({y, std::move(z)});
    }
    return out;
  }

  while (out.size() < p.count) {
    auto idx = sample_support(rng, p.dim, p.nnz);
    std::vector<double> base(idx.size());
    for (auto& v : base) v = standard_normal(rng);
    const double y = flip(label_for(w, normalized(idx, base, p.z_norm)));
    for (std::size_t k = 0; k < p.block && out.size() < p.count; ++k) {
      std::vector<double> vals = base;
      for (auto& v : vals) v += 0.1 * standard_normal(rng);
      out.push_back({y, normalized(idx, std::move(vals), p.z_norm)});
    }
  }
  return out;
}

CorpusReadResult parse_corpus(std::string_view content) {
  CorpusReadResult result;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t\r\v\f") == std::string_view::npos) {
      if (end == content.size()) break;
      continue;
    }
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      ++result.malformed;
      continue;
    }
    const std::string_view label = line.substr(0, tab);
    double y = 0.0;
    if (label == "1" || label == "+1") {
      y = 1.0;
    } else if (label == "-1" || label == "0") {
      y = -1.0;
    } else {
      ++result.malformed;
      continue;
    }
    result.documents.push_back({y, std::string(line.substr(tab + 1))});
    if (end == content.size()) break;
  }
  return result;
}

CorpusReadResult read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open corpus file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str());
}

std::vector<SparseExample> featurize(std::span<const LabeledText> docs, const HashConfig& cfg, FeatureKind kind,
                                     std::size_t pair_token_cap, FeatureStats* stats) {
  cfg.validate();
  std::vector<SparseExample> out;
  out.reserve(docs.size());
  for (const auto& doc : docs) {
    const auto tokens = tokenize(doc.text);
    SparseVector z = kind == FeatureKind::linear ? hash_features(tokens, cfg)
                                                 : quadratic_features(tokens, cfg, pair_token_cap, stats);
    out.push_back({doc.label, std::move(z)});
  }
  return out;
}

void TextCorpusParams::validate() const {
  if (documents == 0 || vocabulary == 0) throw DomainError("corpus needs documents and vocabulary");
  if (indicative == 0 || 2 * indicative > vocabulary) throw DomainError("indicative words must fit the vocabulary twice");
  if (min_length == 0 || max_length < min_length) throw DomainError("invalid document length range");
  if (!(signal_rate >= 0.0 && signal_rate <= 1.0)) throw DomainError("signal_rate must lie in [0, 1]");
  if (!(label_noise >= 0.0 && label_noise <= 0.5)) throw DomainError("label_noise must lie in [0, 0.5]");
}

std::vector<LabeledText> synthetic_corpus(const TextCorpusParams& p, std::uint64_t seed) {
  p.validate();
  Rng rng(seed);
  // Zipf background over the whole vocabulary.
  std::vector<double> cdf(p.vocabulary);
  double total = 0.0;
  for (std::size_t r = 0; r < p.vocabulary; ++r) {
    total += 1.0 / static_cast<double>(r + 1);
    cdf[r] = total;
  }
  for (auto& c : cdf) c /= total;
  // Indicative words are mid-frequency ranks: positives first, negatives after.
  const std::size_t first_indicative = p.vocabulary / 10;
  auto indicative_word = [&](double y) {
    const std::size_t k = uniform_below(rng, p.indicative);
    const std::size_t offset = y > 0.0 ? 0 : p.indicative;
    return (first_indicative + offset + k) % p.vocabulary;
  };

  std::vector<LabeledText> docs;
  docs.reserve(p.documents);
  std::string text;
  for (std::size_t n = 0; n < p.documents; ++n) {
    const double y = uniform01(rng) < p.positive_rate ? 1.0 : -1.0;
    const std::size_t len = p.min_length + uniform_below(rng, p.max_length - p.min_length + 1);
    text.clear();
    for (std::size_t k = 0; k < len; ++k) {
      std::size_t word;
      if (uniform01(rng) < p.signal_rate) {
        word = indicative_word(y);
      } else {
        const double u = uniform01(rng);
        word = static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        if (word >= p.vocabulary) word = p.vocabulary - 1;
      }
      if (k > 0) text.push_back(' ');
      text.append("w");
      text.append(std::to_string(word));
    }
    const double label = uniform01(rng) < p.label_noise ? -y : y;
    docs.push_back({label, text});
  }
  return docs;
}

}  // namespace dsgd
