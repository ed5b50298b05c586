#include "gsadvisor/text_features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "gsadvisor/error.hpp"
#include "gsadvisor/hashing.hpp"

namespace gsadvisor {
namespace {

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_ascii_punct(unsigned char c) {
  return (c >= 0x21 && c <= 0x2f) || (c >= 0x3a && c <= 0x40) || (c >= 0x5b && c <= 0x60) ||
         (c >= 0x7b && c <= 0x7e);
}

bool is_utf8_continuation(unsigned char c) { return (c & 0xc0) == 0x80; }

std::size_t code_points(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return !is_utf8_continuation(static_cast<unsigned char>(c)); }));
}

}  // namespace

TokenSequence tokenize(std::string_view raw) {
  TokenSequence seq;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      seq.tokens.push_back(std::move(current));
      current.clear();
    }
  };
  for (char ch : raw) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_ascii_space(c)) {
      flush();
      continue;
    }
    if (!is_utf8_continuation(c)) ++seq.char_count;
    if (is_ascii_punct(c)) {
      flush();
      continue;
    }
    current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
  }
  flush();
  return seq;
}

std::string normalized_text(const TokenSequence& seq) {
  std::string out;
  for (const auto& token : seq.tokens) {
    if (!out.empty()) out.push_back(' ');
    out += token;
  }
  return out;
}

std::array<double, ComplexityFeatures::kDim> ComplexityFeatures::values() const {
  return {static_cast<double>(token_count),
          static_cast<double>(char_count),
          token_entropy,
          char_ngram_perplexity,
          modifier_diversity,
          type_token_ratio,
          mean_token_length};
}

// ---------------------------------------------------------------------------
// Lexicon

ModifierLexicon::ModifierLexicon(std::set<std::string> words) : words_(words.begin(), words.end()) {}

ModifierLexicon ModifierLexicon::parse(std::istream& in) {
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && is_ascii_space(static_cast<unsigned char>(line.back()))) line.pop_back();
    std::size_t start = 0;
    while (start < line.size() && is_ascii_space(static_cast<unsigned char>(line[start]))) ++start;
    if (start == line.size() || line[start] == '#') continue;
    words.insert(line.substr(start));
  }
  return ModifierLexicon(std::move(words));
}

ModifierLexicon ModifierLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open lexicon " + path.string());
  return parse(in);
}

std::uint64_t ModifierLexicon::fingerprint() const {
  StableHasher hasher;
  hasher.add(static_cast<std::uint64_t>(words_.size()));
  for (const auto& w : words_) hasher.add(w);
  return hasher.digest();
}

// ---------------------------------------------------------------------------
// Character n-gram model

CharNgramModel::CharNgramModel(int order, double smoothing_k, std::set<unsigned char> alphabet, CountTable counts)
    : order_(order), smoothing_k_(smoothing_k), alphabet_(std::move(alphabet)), counts_(std::move(counts)) {
  if (order_ < 1) throw Error(ErrorCode::kInvalidArgument, "n-gram order must be >= 1");
  if (!(smoothing_k_ > 0.0) || !std::isfinite(smoothing_k_)) {
    throw Error(ErrorCode::kInvalidArgument, "smoothing_k must be finite and > 0");
  }
  for (const auto& [context, successors] : counts_) {
    if (context.size() != static_cast<std::size_t>(order_)) {
      throw Error(ErrorCode::kFormatError, "context length does not match order");
    }
    std::uint64_t total = 0;
    for (const auto& [ch, n] : successors) total += n;
    context_totals_.emplace(context, total);
  }
}

double CharNgramModel::probability(std::string_view context, unsigned char next) const {
  const double v = static_cast<double>(alphabet_size());
  std::uint64_t joint = 0;
  std::uint64_t total = 0;
  if (auto it = context_totals_.find(context); it != context_totals_.end()) {
    total = it->second;
    const auto& successors = counts_.find(context)->second;
    if (auto s = successors.find(next); s != successors.end()) joint = s->second;
  }
  return (static_cast<double>(joint) + smoothing_k_) / (static_cast<double>(total) + smoothing_k_ * v);
}

double CharNgramModel::perplexity(std::string_view text) const {
  if (text.empty()) return static_cast<double>(alphabet_size());
  std::string context(static_cast<std::size_t>(order_), '\0');
  double neg_log = 0.0;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    neg_log -= std::log(probability(context, c));
    context.erase(context.begin());
    context.push_back(ch);
  }
  return std::max(1.0, std::exp(neg_log / static_cast<double>(text.size())));
}

CharNgramModel train_char_lm(std::span<const std::string> corpus, int order, double smoothing_k) {
  if (order < 1) throw Error(ErrorCode::kInvalidArgument, "n-gram order must be >= 1");
  CharNgramModel::CountTable counts;
  std::set<unsigned char> alphabet;
  for (const auto& doc : corpus) {
    std::string context(static_cast<std::size_t>(order), '\0');
    for (char ch : doc) {
      const auto c = static_cast<unsigned char>(ch);
      alphabet.insert(c);
      ++counts[context][c];
      context.erase(context.begin());
      context.push_back(ch);
    }
  }
  if (alphabet.empty()) throw Error(ErrorCode::kEmptyCorpus, "corpus contains no characters");
  return CharNgramModel(order, smoothing_k, std::move(alphabet), std::move(counts));
}

// ---------------------------------------------------------------------------
// Features

ComplexityFeatures complexity_features(const TokenSequence& seq, const CharNgramModel& lm,
                                       const ModifierLexicon& lexicon) {
  if (lexicon.empty()) throw Error(ErrorCode::kInvalidArgument, "modifier lexicon is empty");
  ComplexityFeatures f;
  f.token_count = seq.tokens.size();
  f.char_count = seq.char_count;
  f.char_ngram_perplexity = lm.perplexity(normalized_text(seq));
  if (f.token_count == 0) return f;

  std::map<std::string_view, std::size_t> freq;
  std::set<std::string_view> modifiers;
  std::size_t total_length = 0;
  for (const auto& token : seq.tokens) {
    ++freq[token];
    if (lexicon.contains(token)) modifiers.insert(token);
    total_length += code_points(token);
  }
  const double n = static_cast<double>(f.token_count);
  double entropy = 0.0;
  for (const auto& [token, count] : freq) {
    const double p = static_cast<double>(count) / n;
    entropy -= p * std::log2(p);
  }
  f.token_entropy = entropy + 0.0;
  f.modifier_diversity = static_cast<double>(modifiers.size()) / n;
  f.type_token_ratio = static_cast<double>(freq.size()) / n;
  f.mean_token_length = static_cast<double>(total_length) / n;
  return f;
}

FeatureNormalization FeatureNormalization::identity() {
  FeatureNormalization norm;
  for (auto name : ComplexityFeatures::kNames) norm.names.emplace_back(name);
  norm.means.assign(ComplexityFeatures::kDim, 0.0);
  norm.stds.assign(ComplexityFeatures::kDim, 1.0);
  return norm;
}

FeatureNormalization FeatureNormalization::fit(std::span<const ComplexityFeatures> pool) {
  FeatureNormalization norm = identity();
  if (pool.empty()) return norm;
  const double n = static_cast<double>(pool.size());
  for (std::size_t d = 0; d < ComplexityFeatures::kDim; ++d) {
    double mean = 0.0;
    for (const auto& f : pool) mean += f.values()[d];
    mean /= n;
    double var = 0.0;
    for (const auto& f : pool) {
      const double diff = f.values()[d] - mean;
      var += diff * diff;
    }
    norm.means[d] = mean;
    norm.stds[d] = std::max(std::sqrt(var / n), kStdFloor);
  }
  return norm;
}

Eigen::VectorXd FeatureNormalization::apply(const ComplexityFeatures& features) const {
  if (means.size() != ComplexityFeatures::kDim || stds.size() != ComplexityFeatures::kDim) {
    throw Error(ErrorCode::kDimensionMismatch, "feature normalization has wrong dimension");
  }
  const auto raw = features.values();
  Eigen::VectorXd z(static_cast<Eigen::Index>(ComplexityFeatures::kDim));
  for (std::size_t d = 0; d < ComplexityFeatures::kDim; ++d) {
    z[static_cast<Eigen::Index>(d)] = (raw[d] - means[d]) / std::max(stds[d], kStdFloor);
  }
  return z;
}

Eigen::VectorXd project_complexity(const ComplexityFeatures& features, const ComplexityProjection& projection,
                                   const FeatureNormalization& norm) {
  const auto d_r = static_cast<Eigen::Index>(ComplexityFeatures::kDim);
  if (projection.weight.cols() != d_r || projection.bias.size() != projection.weight.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "complexity projection shape does not match feature count");
  }
  return projection.weight * norm.apply(features) + projection.bias;
}

}  // namespace gsadvisor
