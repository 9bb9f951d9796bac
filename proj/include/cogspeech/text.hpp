#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cogspeech/corpus.hpp"
#include "cogspeech/lm.hpp"
#include "cogspeech/summary.hpp"

namespace cogspeech::text {

enum class OovVariant {
  // |complement(V_i) ∩ V_others| / |V_i|
  others_not_subject,
  // |V_i ∩ complement(V_others)| / |V_i|
  subject_not_others,
};

enum class PplNormalization {
  evaluated_tokens,
  training_vocabulary,
};

struct Options {
  OovVariant oov = OovVariant::others_not_subject;
  PplNormalization ppl = PplNormalization::evaluated_tokens;
  std::optional<lm::Discounts> discounts;
};

// Word count per subject turn (tags and punctuation excluded).
std::size_t word_count(const Turn& turn);

// words_{mean,min,max,median,sum}, dur_{mean,min,max,median},
// wpm_{mean,min,max,median} over subject turns.
NamedVector per_turn_stats(const Transcript& transcript);

// q_mean, q_sum, um_mean, um_sum over subject turns.
NamedVector question_hesitation_counts(const Transcript& transcript);

// Case-folded words spoken by the subject.
std::set<std::string> subject_vocabulary(const Transcript& transcript);
std::size_t vocabulary_size(const Transcript& transcript);

// Throws PreconditionError for an empty subject vocabulary.
double oov_rate(const std::set<std::string>& subject_vocab,
                const std::set<std::string>& others_vocab,
                OovVariant variant = OovVariant::others_not_subject);

// One sentence per subject turn with at least one word; case-folded words.
std::vector<lm::Sentence> lm_sentences(const Transcript& transcript);

struct PerplexityPair {
  double self = 0.0;
  double others = 0.0;
};

// Trains on every transcript except `subject` and scores the subject and the
// training subjects under that model.
PerplexityPair perplexity_features(std::size_t subject, std::span<const Transcript> corpus,
                                   const Options& options = {});

// The 21 text features of corpus[subject].
NamedVector extract_features(std::size_t subject, std::span<const Transcript> corpus,
                             const Options& options = {});

}  // namespace cogspeech::text

namespace cogspeech {
const std::vector<std::string>& text_feature_names();
}
