#include "gsadvisor/featurizer.hpp"

#include "gsadvisor/error.hpp"

namespace gsadvisor {

PromptFeaturizer::PromptFeaturizer(CharNgramModel lm, ModifierLexicon lexicon, EmbeddingProvider embeddings)
    : lm_(std::move(lm)), lexicon_(std::move(lexicon)), embeddings_(std::move(embeddings)) {
  if (lexicon_.empty()) throw Error(ErrorCode::kInvalidArgument, "modifier lexicon is empty");
}

PromptFeaturizer PromptFeaturizer::fit(std::span<const PromptRecord> pool, ModifierLexicon lexicon,
                                       EmbeddingProvider embeddings, int order, double smoothing_k) {
  std::vector<std::string> corpus;
  corpus.reserve(pool.size());
  for (const auto& p : pool) corpus.push_back(normalized_text(tokenize(p.text)));
  return PromptFeaturizer(train_char_lm(corpus, order, smoothing_k), std::move(lexicon), std::move(embeddings));
}

PromptFeaturizer PromptFeaturizer::for_model(const PredictorModel& model, ModifierLexicon lexicon,
                                             EmbeddingProvider embeddings) {
  if (!model.char_lm) throw Error(ErrorCode::kFormatError, "model file carries no character LM");
  if (model.lexicon_fingerprint && *model.lexicon_fingerprint != lexicon.fingerprint()) {
    throw Error(ErrorCode::kSchemaMismatch, "modifier lexicon differs from the one the model was trained with");
  }
  if (embeddings.dimension() != model.d_e) {
    throw Error(ErrorCode::kDimensionMismatch, "embedding dimension " + std::to_string(embeddings.dimension()) +
                                                   " does not match model d_e " + std::to_string(model.d_e));
  }
  return PromptFeaturizer(*model.char_lm, std::move(lexicon), std::move(embeddings));
}

ComplexityFeatures PromptFeaturizer::complexity(const PromptRecord& prompt) const {
  return complexity_features(tokenize(prompt.text), lm_, lexicon_);
}

PromptInput PromptFeaturizer::featurize(const PromptRecord& prompt) const {
  return PromptInput{prompt.id, embedding(prompt), complexity(prompt)};
}

void PromptFeaturizer::attach_to(PredictorModel& model) const {
  model.char_lm = lm_;
  model.lexicon_fingerprint = lexicon_.fingerprint();
  model.embedding.dim = embeddings_.dimension();
  model.embedding.source = embeddings_.has_store() ? EmbeddingSource::kFile : EmbeddingSource::kHashed;
  model.embedding.encoder = embeddings_.encoder();
}

}  // namespace gsadvisor
