#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cogspeech::lm {

inline constexpr std::string_view kSentenceStart = "<s>";
inline constexpr std::string_view kSentenceEnd = "</s>";
inline constexpr std::string_view kUnknown = "<unk>";

using Sentence = std::vector<std::string>;

// Absolute discount per order; index 0 is the unigram level.
using Discounts = std::array<double, 3>;

// n1 / (n1 + 2 n2), or 0.5 (with a warning) when no singletons exist.
double discount_from_counts(std::uint64_t n1, std::uint64_t n2);

// Interpolated Kneser-Ney trigram model with one discount per order.
// Sentences are padded as <s> <s> w1 .. wn </s>; lower orders use
// continuation counts and the unigram level interpolates with a uniform
// distribution over the predictable tokens (training words, </s>, <unk>).
class NGramModel {
 public:
  // Throws PreconditionError when every sentence is empty. Pinned discounts
  // must lie in (0, 1].
  static NGramModel train(std::span<const Sentence> sentences,
                          std::optional<Discounts> pinned = std::nullopt);

  // p(word | u v); unseen tokens map to <unk>.
  double probability(std::string_view word, std::string_view u, std::string_view v) const;

  const Discounts& discounts() const noexcept { return discounts_; }
  // Distinct training words, markers excluded.
  std::size_t word_types() const noexcept { return vocab_.size() - kReserved; }
  // Training words, </s> and <unk>.
  std::vector<std::string> predictable_tokens() const;
  // Every (u, v) history with at least one trigram continuation.
  std::vector<std::pair<std::string, std::string>> observed_contexts() const;

  // Plain-text count file, versioned; see README.
  void save(std::ostream& out) const;
  static NGramModel load(std::istream& in);

  // Log2-probability of each predicted token (words then </s>).
  void score_sentence(const Sentence& sentence, std::vector<double>& log2_probs) const;

 private:
  using Id = std::uint32_t;
  static constexpr Id kStart = 0;
  static constexpr Id kEnd = 1;
  static constexpr Id kUnk = 2;
  static constexpr std::size_t kReserved = 3;

  struct Context {
    std::uint32_t total = 0;  // sum of counts over continuations
    std::uint32_t types = 0;  // distinct continuations
  };

  NGramModel();
  Id intern(std::string_view word);
  Id lookup(std::string_view word) const;
  void rebuild(std::optional<Discounts> pinned);
  double prob_ids(Id w, Id u, Id v) const;
  double prob_bigram(Id w, Id v) const;
  double prob_unigram(Id w) const;

  static std::uint64_t key2(Id a, Id b) { return (std::uint64_t{a} << 32) | b; }
  static std::uint64_t key3(Id a, Id b, Id c) {
    return (std::uint64_t{a} << 42) | (std::uint64_t{b} << 21) | c;
  }

  std::vector<std::string> vocab_;
  std::unordered_map<std::string, Id> index_;
  std::unordered_map<std::uint64_t, std::uint32_t> trigrams_;
  std::unordered_map<std::uint64_t, Context> contexts3_;
  std::unordered_map<std::uint64_t, std::uint32_t> continuation2_;
  std::unordered_map<Id, Context> contexts2_;
  std::vector<std::uint32_t> continuation1_;
  Context unigram_;
  Discounts discounts_{};
};

struct Perplexity {
  double value = 0.0;
  double log2_sum = 0.0;
  std::size_t tokens = 0;
};

// 2^H with H = -log2_sum / normalizer.
double perplexity_from_log2(double log2_sum, double normalizer);

// Normalized by the number of scored tokens unless `normalizer` is given.
Perplexity perplexity(const NGramModel& model, std::span<const Sentence> sentences,
                      std::optional<double> normalizer = std::nullopt);

}  // namespace cogspeech::lm
