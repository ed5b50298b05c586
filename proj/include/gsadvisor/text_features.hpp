#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace gsadvisor {

struct TokenSequence {
  std::vector<std::string> tokens;
  std::size_t char_count = 0;  // non-whitespace code points of the raw text
};

// Lowercases ASCII, splits on whitespace and ASCII punctuation, drops punctuation.
// Bytes >= 0x80 are treated as word characters.
TokenSequence tokenize(std::string_view raw);

// Tokens joined by single spaces; the canonical string the character LM sees.
std::string normalized_text(const TokenSequence& seq);

// r(p): fixed, ordered statistics of a prompt. The order of kNames is the
// feature schema exported with every model.
struct ComplexityFeatures {
  static constexpr std::size_t kDim = 7;
  static constexpr std::array<std::string_view, kDim> kNames = {
      "token_count",       "char_count",       "token_entropy",    "char_ngram_perplexity",
      "modifier_diversity", "type_token_ratio", "mean_token_length"};

  std::size_t token_count = 0;
  std::size_t char_count = 0;
  double token_entropy = 0.0;          // bits
  double char_ngram_perplexity = 1.0;  // >= 1
  double modifier_diversity = 0.0;     // distinct lexicon hits / token_count
  double type_token_ratio = 0.0;
  double mean_token_length = 0.0;

  std::array<double, kDim> values() const;
};

class ModifierLexicon {
 public:
  ModifierLexicon() = default;
  explicit ModifierLexicon(std::set<std::string> words);

  // One lowercase word per line; blank lines and lines starting with '#' are skipped.
  static ModifierLexicon parse(std::istream& in);
  static ModifierLexicon load(const std::filesystem::path& path);

  bool contains(std::string_view word) const { return words_.find(word) != words_.end(); }
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }
  std::vector<std::string> words() const { return {words_.begin(), words_.end()}; }

  // Stable hash of the sorted word list; recorded in model files.
  std::uint64_t fingerprint() const;

 private:
  std::set<std::string, std::less<>> words_;
};

// Character n-gram model with add-k smoothing. `order` is the number of
// context characters; the start of each document is padded with NUL bytes.
class CharNgramModel {
 public:
  using SuccessorCounts = std::map<unsigned char, std::uint64_t>;
  using CountTable = std::map<std::string, SuccessorCounts, std::less<>>;

  CharNgramModel(int order, double smoothing_k, std::set<unsigned char> alphabet, CountTable counts);

  int order() const { return order_; }
  double smoothing_k() const { return smoothing_k_; }
  // Distinct characters seen in training plus one slot for unknowns.
  std::size_t alphabet_size() const { return alphabet_.size() + 1; }
  const std::set<unsigned char>& alphabet() const { return alphabet_; }
  const CountTable& counts() const { return counts_; }

  double probability(std::string_view context, unsigned char next) const;

  // exp of the mean negative log-probability per character; the empty
  // string has perplexity alphabet_size().
  double perplexity(std::string_view text) const;

 private:
  int order_;
  double smoothing_k_;
  std::set<unsigned char> alphabet_;
  CountTable counts_;
  std::map<std::string, std::uint64_t, std::less<>> context_totals_;
};

CharNgramModel train_char_lm(std::span<const std::string> corpus, int order = 3, double smoothing_k = 0.1);

ComplexityFeatures complexity_features(const TokenSequence& seq, const CharNgramModel& lm,
                                       const ModifierLexicon& lexicon);

// z-score statistics over the training pool; std is floored at kStdFloor.
struct FeatureNormalization {
  static constexpr double kStdFloor = 1e-8;

  std::vector<std::string> names;
  std::vector<double> means;
  std::vector<double> stds;

  static FeatureNormalization identity();
  static FeatureNormalization fit(std::span<const ComplexityFeatures> pool);

  Eigen::VectorXd apply(const ComplexityFeatures& features) const;
};

// c(p) = W_c z(r(p)) + b_c.
struct ComplexityProjection {
  Eigen::MatrixXd weight;  // d_c x kDim
  Eigen::VectorXd bias;    // d_c

  Eigen::Index output_dim() const { return weight.rows(); }
};

Eigen::VectorXd project_complexity(const ComplexityFeatures& features, const ComplexityProjection& projection,
                                   const FeatureNormalization& norm);

}  // namespace gsadvisor
