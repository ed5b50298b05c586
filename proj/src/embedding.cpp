#include "gsadvisor/embedding.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "gsadvisor/error.hpp"
#include "gsadvisor/hashing.hpp"
#include "json.hpp"

namespace gsadvisor {
namespace {

using nlohmann::json;

constexpr std::string_view kEmbeddingSchema = "emb.v1";
constexpr std::uint64_t kBucketSeed = 0x6275636b65745f31ULL;
constexpr std::uint64_t kSignSeed = 0x7369676e5f686173ULL;

std::string line_context(const std::filesystem::path& path, std::size_t line_no) {
  return path.string() + ":" + std::to_string(line_no);
}

}  // namespace

Eigen::VectorXd l2_normalize(Eigen::VectorXd v) {
  if (!v.allFinite()) throw Error(ErrorCode::kFormatError, "embedding has non-finite entries");
  const double sq = v.squaredNorm();
  if (!(sq > 0.0)) throw Error(ErrorCode::kFormatError, "embedding has zero norm");
  if (std::abs(sq - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon()) return v;
  v /= std::sqrt(sq);
  return v;
}

EmbeddingStore::EmbeddingStore(std::size_t dimension, std::string provenance)
    : dimension_(dimension), provenance_(std::move(provenance)) {
  if (dimension_ == 0) throw Error(ErrorCode::kFormatError, "embedding dimension must be positive");
}

void EmbeddingStore::insert(const std::string& id, Eigen::VectorXd vector) {
  if (static_cast<std::size_t>(vector.size()) != dimension_) {
    throw Error(ErrorCode::kDimensionMismatch, "embedding for '" + id + "' has " + std::to_string(vector.size()) +
                                                   " entries, expected " + std::to_string(dimension_));
  }
  if (entries_.count(id) != 0) throw Error(ErrorCode::kDuplicateId, "duplicate embedding id '" + id + "'");
  entries_.emplace(id, l2_normalize(std::move(vector)));
}

const Eigen::VectorXd* EmbeddingStore::find(const std::string& id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

EmbeddingStore load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open embedding file " + path.string());

  std::optional<EmbeddingStore> store;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kFormatError, line_context(path, line_no) + ": " + e.what());
    }
    if (!obj.is_object()) throw Error(ErrorCode::kFormatError, line_context(path, line_no) + ": expected object");

    if (!store) {
      if (obj.value("schema", "") != kEmbeddingSchema) {
        throw Error(ErrorCode::kFormatError, line_context(path, line_no) + ": header schema must be emb.v1");
      }
      const auto dim = obj.find("dim");
      if (dim == obj.end() || !dim->is_number_unsigned() || dim->get<std::size_t>() == 0) {
        throw Error(ErrorCode::kFormatError, line_context(path, line_no) + ": header needs positive integer dim");
      }
      const auto encoder = obj.find("encoder");
      store.emplace(dim->get<std::size_t>(),
                    encoder != obj.end() && encoder->is_string() ? encoder->get<std::string>() : std::string{});
      continue;
    }

    const auto id = obj.find("id");
    const auto v = obj.find("v");
    if (id == obj.end() || !id->is_string() || v == obj.end() || !v->is_array()) {
      throw Error(ErrorCode::kFormatError, line_context(path, line_no) + ": row needs string id and array v");
    }
    Eigen::VectorXd vec(static_cast<Eigen::Index>(v->size()));
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number()) throw Error(ErrorCode::kFormatError, line_context(path, line_no) + ": non-numeric entry");
      vec[static_cast<Eigen::Index>(i)] = (*v)[i].get<double>();
    }
    try {
      store->insert(id->get<std::string>(), std::move(vec));
    } catch (const Error& e) {
      throw Error(e.code(), line_context(path, line_no) + ": " + e.what());
    }
  }
  if (!store) throw Error(ErrorCode::kFormatError, path.string() + ": missing header");
  return std::move(*store);
}

void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write embedding file " + path.string());
  out << json{{"schema", kEmbeddingSchema}, {"dim", store.dimension()}, {"encoder", store.provenance()}}.dump()
      << '\n';
  for (const auto& [id, vec] : store.entries()) {
    out << json{{"id", id}, {"v", std::vector<double>(vec.data(), vec.data() + vec.size())}}.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

SemanticEmbedding hashed_embedding(const TokenSequence& seq, std::size_t dim, const HashingOptions& options) {
  if (dim < kMinHashedEmbeddingDim) {
    throw Error(ErrorCode::kInvalidArgument, "hashed embedding dimension must be >= 8");
  }
  SemanticEmbedding out;
  out.source = EmbeddingSource::kHashed;
  out.vector = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));

  auto add_feature = [&](std::string_view kind, std::string_view a, std::string_view b) {
    const auto bucket = StableHasher{}.add(kBucketSeed).add(kind).add(a).add(b).digest() % dim;
    const auto sign_bit = StableHasher{}.add(kSignSeed).add(kind).add(a).add(b).digest() >> 63;
    out.vector[static_cast<Eigen::Index>(bucket)] += sign_bit ? -1.0 : 1.0;
  };
  const auto& tokens = seq.tokens;
  if (options.unigrams) {
    for (const auto& t : tokens) add_feature("u", t, "");
  }
  if (options.bigrams) {
    for (std::size_t i = 1; i < tokens.size(); ++i) add_feature("b", tokens[i - 1], tokens[i]);
  }

  // Empty prompts and complete sign cancellations fall back to e_1.
  if (out.vector.squaredNorm() == 0.0) {
    out.vector[0] = 1.0;
    return out;
  }
  out.vector = l2_normalize(std::move(out.vector));
  return out;
}

EmbeddingProvider::EmbeddingProvider(std::size_t hashed_dim) : hashed_dim_(hashed_dim) {
  if (hashed_dim_ < kMinHashedEmbeddingDim) {
    throw Error(ErrorCode::kInvalidArgument, "hashed embedding dimension must be >= 8");
  }
}

EmbeddingProvider::EmbeddingProvider(EmbeddingStore store, bool fallback)
    : store_(std::move(store)), fallback_(fallback), hashed_dim_(store_->dimension()) {
  if (fallback_ && hashed_dim_ < kMinHashedEmbeddingDim) {
    throw Error(ErrorCode::kInvalidArgument, "store dimension too small for hashed fallback");
  }
}

std::size_t EmbeddingProvider::dimension() const { return store_ ? store_->dimension() : hashed_dim_; }

std::string EmbeddingProvider::encoder() const {
  return store_ ? store_->provenance() : std::string("hashed-unigram-bigram");
}

SemanticEmbedding EmbeddingProvider::get(const PromptRecord& prompt) const {
  if (store_) {
    if (const auto* v = store_->find(prompt.id)) {
      return SemanticEmbedding{*v, EmbeddingSource::kFile, prompt.id};
    }
    if (!fallback_) throw Error(ErrorCode::kMissingEmbedding, "no embedding for prompt '" + prompt.id + "'");
  }
  auto e = hashed_embedding(tokenize(prompt.text), hashed_dim_);
  e.prompt_id = prompt.id;
  return e;
}

}  // namespace gsadvisor
