#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "gsadvisor/prompts.hpp"
#include "gsadvisor/text_features.hpp"

namespace gsadvisor {

enum class EmbeddingSource { kFile, kHashed };

struct SemanticEmbedding {
  Eigen::VectorXd vector;  // unit L2 norm
  EmbeddingSource source = EmbeddingSource::kHashed;
  std::string prompt_id;
};

inline constexpr std::size_t kDefaultFileEmbeddingDim = 512;
inline constexpr std::size_t kDefaultHashedEmbeddingDim = 4096;
inline constexpr std::size_t kMinHashedEmbeddingDim = 8;

// Table of precomputed e(p) vectors keyed by exact prompt id (emb.v1 files).
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::size_t dimension, std::string provenance = {});

  std::size_t dimension() const { return dimension_; }
  const std::string& provenance() const { return provenance_; }
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, Eigen::VectorXd>& entries() const { return entries_; }

  // Normalizes and stores; throws DimensionMismatch, DuplicateId, or FormatError for zero/non-finite vectors.
  void insert(const std::string& id, Eigen::VectorXd vector);
  const Eigen::VectorXd* find(const std::string& id) const;

 private:
  std::size_t dimension_;
  std::string provenance_;
  std::map<std::string, Eigen::VectorXd> entries_;
};

EmbeddingStore load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path);

// Scales v to unit L2 norm. Vectors already unit-norm to machine precision are
// returned unchanged so save/load round-trips are bit-exact.
Eigen::VectorXd l2_normalize(Eigen::VectorXd v);

struct HashingOptions {
  bool unigrams = true;
  bool bigrams = true;
};

// Sign-hashed bag of unigrams and bigrams, L2-normalized. An empty sequence
// maps to the unit vector e_1.
SemanticEmbedding hashed_embedding(const TokenSequence& seq, std::size_t dim,
                                   const HashingOptions& options = {});

// Resolves e(p): file vector by id, else the hashed fallback (if enabled).
class EmbeddingProvider {
 public:
  // Hashed-only provider.
  explicit EmbeddingProvider(std::size_t hashed_dim = kDefaultHashedEmbeddingDim);
  // File-backed provider; the fallback uses the store's dimension.
  EmbeddingProvider(EmbeddingStore store, bool fallback);

  std::size_t dimension() const;
  bool has_store() const { return store_.has_value(); }
  bool fallback_enabled() const { return fallback_; }
  // Store provenance, or a fixed tag for the hashed embedder.
  std::string encoder() const;

  SemanticEmbedding get(const PromptRecord& prompt) const;

 private:
  std::optional<EmbeddingStore> store_;
  bool fallback_ = true;
  std::size_t hashed_dim_;
};

}  // namespace gsadvisor
