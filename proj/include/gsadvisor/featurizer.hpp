#pragma once

#include <span>

#include "gsadvisor/embedding.hpp"
#include "gsadvisor/predictor.hpp"
#include "gsadvisor/prompts.hpp"
#include "gsadvisor/text_features.hpp"

namespace gsadvisor {

inline constexpr int kDefaultLmOrder = 3;
inline constexpr double kDefaultLmSmoothing = 0.1;

// Everything needed to turn a prompt into (e(p), r(p)).
class PromptFeaturizer {
 public:
  PromptFeaturizer(CharNgramModel lm, ModifierLexicon lexicon, EmbeddingProvider embeddings);

  // Trains the character LM on the pool's normalized text.
  static PromptFeaturizer fit(std::span<const PromptRecord> pool, ModifierLexicon lexicon,
                              EmbeddingProvider embeddings, int order = kDefaultLmOrder,
                              double smoothing_k = kDefaultLmSmoothing);

  // Rebuilds the featurizer a trained model was fitted with. Throws
  // FormatError if the model carries no LM, SchemaMismatch if the lexicon differs.
  static PromptFeaturizer for_model(const PredictorModel& model, ModifierLexicon lexicon,
                                    EmbeddingProvider embeddings);

  ComplexityFeatures complexity(const PromptRecord& prompt) const;
  SemanticEmbedding embedding(const PromptRecord& prompt) const { return embeddings_.get(prompt); }
  PromptInput featurize(const PromptRecord& prompt) const;

  const CharNgramModel& char_lm() const { return lm_; }
  const ModifierLexicon& lexicon() const { return lexicon_; }
  const EmbeddingProvider& embeddings() const { return embeddings_; }

  // Copies the LM, lexicon fingerprint and embedding spec into the model.
  void attach_to(PredictorModel& model) const;

 private:
  CharNgramModel lm_;
  ModifierLexicon lexicon_;
  EmbeddingProvider embeddings_;
};

}  // namespace gsadvisor
