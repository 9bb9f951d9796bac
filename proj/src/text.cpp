#include "cogspeech/text.hpp"

#include <algorithm>

#include "cogspeech/error.hpp"

namespace cogspeech {

const std::vector<std::string>& text_feature_names() {
  static const std::vector<std::string> names{
      "words_mean", "words_min", "words_max", "words_median", "words_sum",
      "dur_mean",   "dur_min",   "dur_max",   "dur_median",   "wpm_mean",
      "wpm_min",    "wpm_max",   "wpm_median", "q_mean",      "q_sum",
      "um_mean",    "um_sum",    "vocab_size", "oov_rate",    "ppl_self",
      "ppl_others"};
  return names;
}

}  // namespace cogspeech

namespace cogspeech::text {

namespace {

std::vector<const Turn*> subject_turns(const Transcript& t) {
  std::vector<const Turn*> turns;
  for (const auto& turn : t.turns) {
    if (turn.speaker == Speaker::subject) turns.push_back(&turn);
  }
  if (turns.empty()) {
    throw PreconditionError("transcript " + t.subject_id + " has no subject turns");
  }
  return turns;
}

std::set<std::string> union_of_others(std::size_t subject,
                                      std::span<const std::set<std::string>> vocabularies) {
  std::set<std::string> others;
  for (std::size_t j = 0; j < vocabularies.size(); ++j) {
    if (j != subject) others.insert(vocabularies[j].begin(), vocabularies[j].end());
  }
  return others;
}

}  // namespace

std::size_t word_count(const Turn& turn) {
  return static_cast<std::size_t>(
      std::count_if(turn.tokens.begin(), turn.tokens.end(),
                    [](const std::string& tok) { return is_word(tok); }));
}

NamedVector per_turn_stats(const Transcript& transcript) {
  std::vector<double> words, durations, wpm;
  for (const Turn* turn : subject_turns(transcript)) {
    const double duration = turn->end - turn->start;
    if (!(duration > 0.0)) {
      throw PreconditionError("transcript " + transcript.subject_id +
                              " has a turn with non-positive duration");
    }
    const auto n = static_cast<double>(word_count(*turn));
    words.push_back(n);
    durations.push_back(duration);
    wpm.push_back(n / duration * 60.0);
  }
  const Summary w = summarize(words);
  const Summary d = summarize(durations);
  const Summary r = summarize(wpm);
  NamedVector out;
  out.push("words_mean", w.mean);
  out.push("words_min", w.min);
  out.push("words_max", w.max);
  out.push("words_median", w.median);
  out.push("words_sum", w.sum);
  out.push("dur_mean", d.mean);
  out.push("dur_min", d.min);
  out.push("dur_max", d.max);
  out.push("dur_median", d.median);
  out.push("wpm_mean", r.mean);
  out.push("wpm_min", r.min);
  out.push("wpm_max", r.max);
  out.push("wpm_median", r.median);
  return out;
}

NamedVector question_hesitation_counts(const Transcript& transcript) {
  std::vector<double> questions, hesitations;
  for (const Turn* turn : subject_turns(transcript)) {
    double q = 0.0, um = 0.0;
    for (const auto& tok : turn->tokens) {
      if (tok == "?") q += 1.0;
      if (is_tag(tok) && fold_case(tok) == "<um>") um += 1.0;
    }
    questions.push_back(q);
    hesitations.push_back(um);
  }
  const Summary q = summarize(questions);
  const Summary um = summarize(hesitations);
  NamedVector out;
  out.push("q_mean", q.mean);
  out.push("q_sum", q.sum);
  out.push("um_mean", um.mean);
  out.push("um_sum", um.sum);
  return out;
}

std::set<std::string> subject_vocabulary(const Transcript& transcript) {
  std::set<std::string> vocab;
  for (const Turn* turn : subject_turns(transcript)) {
    for (const auto& tok : turn->tokens) {
      if (is_word(tok)) vocab.insert(fold_case(tok));
    }
  }
  return vocab;
}

std::size_t vocabulary_size(const Transcript& transcript) {
  return subject_vocabulary(transcript).size();
}

double oov_rate(const std::set<std::string>& subject_vocab,
                const std::set<std::string>& others_vocab, OovVariant variant) {
  if (subject_vocab.empty()) throw PreconditionError("OOV rate of an empty vocabulary");
  std::size_t count = 0;
  if (variant == OovVariant::others_not_subject) {
    for (const auto& w : others_vocab) count += subject_vocab.contains(w) ? 0 : 1;
  } else {
    for (const auto& w : subject_vocab) count += others_vocab.contains(w) ? 0 : 1;
  }
  return static_cast<double>(count) / static_cast<double>(subject_vocab.size());
}

std::vector<lm::Sentence> lm_sentences(const Transcript& transcript) {
  std::vector<lm::Sentence> sentences;
  for (const Turn* turn : subject_turns(transcript)) {
    lm::Sentence s;
    for (const auto& tok : turn->tokens) {
      if (is_word(tok)) s.push_back(fold_case(tok));
    }
    if (!s.empty()) sentences.push_back(std::move(s));
  }
  return sentences;
}

PerplexityPair perplexity_features(std::size_t subject, std::span<const Transcript> corpus,
                                   const Options& options) {
  if (corpus.size() < 2) throw PreconditionError("perplexity features need at least 2 subjects");
  if (subject >= corpus.size()) throw PreconditionError("subject index out of range");
  std::vector<lm::Sentence> training;
  for (std::size_t j = 0; j < corpus.size(); ++j) {
    if (j == subject) continue;
    auto s = lm_sentences(corpus[j]);
    std::move(s.begin(), s.end(), std::back_inserter(training));
  }
  const auto model = lm::NGramModel::train(training, options.discounts);
  std::optional<double> normalizer;
  if (options.ppl == PplNormalization::training_vocabulary) {
    normalizer = static_cast<double>(model.word_types());
  }
  const auto self_sentences = lm_sentences(corpus[subject]);
  PerplexityPair out;
  out.self = lm::perplexity(model, self_sentences, normalizer).value;
  out.others = lm::perplexity(model, training, normalizer).value;
  return out;
}

NamedVector extract_features(std::size_t subject, std::span<const Transcript> corpus,
                             const Options& options) {
  if (subject >= corpus.size()) throw PreconditionError("subject index out of range");
  const Transcript& t = corpus[subject];
  NamedVector out = per_turn_stats(t);
  out.append(question_hesitation_counts(t));

  std::vector<std::set<std::string>> vocabularies;
  vocabularies.reserve(corpus.size());
  for (const auto& other : corpus) vocabularies.push_back(subject_vocabulary(other));
  const auto& own = vocabularies[subject];
  out.push("vocab_size", static_cast<double>(own.size()));
  out.push("oov_rate", oov_rate(own, union_of_others(subject, vocabularies), options.oov));

  const auto ppl = perplexity_features(subject, corpus, options);
  out.push("ppl_self", ppl.self);
  out.push("ppl_others", ppl.others);
  return out;
}

}  // namespace cogspeech::text
