#include "cogspeech/lm.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "cogspeech/corpus.hpp"
#include "cogspeech/error.hpp"

namespace cogspeech::lm {

namespace {

constexpr std::string_view kMagic = "cogspeech-kn3";
constexpr int kFormatVersion = 1;
constexpr std::uint32_t kMaxIds = 1u << 21;

}  // namespace

double discount_from_counts(std::uint64_t n1, std::uint64_t n2) {
  if (n1 == 0 || n1 + 2 * n2 == 0) {
    spdlog::warn("no singleton n-grams (n1={}, n2={}); discount defaults to 0.5", n1, n2);
    return 0.5;
  }
  return static_cast<double>(n1) / static_cast<double>(n1 + 2 * n2);
}

NGramModel::NGramModel() {
  for (auto w : {kSentenceStart, kSentenceEnd, kUnknown}) intern(w);
}

NGramModel::Id NGramModel::intern(std::string_view word) {
  const auto it = index_.find(std::string(word));
  if (it != index_.end()) return it->second;
  if (vocab_.size() >= kMaxIds) throw PreconditionError("language model vocabulary too large");
  const auto id = static_cast<Id>(vocab_.size());
  vocab_.emplace_back(word);
  index_.emplace(vocab_.back(), id);
  return id;
}

NGramModel::Id NGramModel::lookup(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  if (it == index_.end() || it->second == kStart) return kUnk;
  return it->second;
}

NGramModel NGramModel::train(std::span<const Sentence> sentences, std::optional<Discounts> pinned) {
  NGramModel m;
  for (const auto& s : sentences) {
    if (s.empty()) continue;
    Id u = kStart, v = kStart;
    auto add = [&](Id w) {
      ++m.trigrams_[key3(u, v, w)];
      u = v;
      v = w;
    };
    for (const auto& word : s) {
      if (word == kSentenceStart || word == kSentenceEnd || word == kUnknown) {
        throw PreconditionError("reserved token '" + word + "' inside a training sentence");
      }
      if (word.empty() || word.find_first_of(" \t\n\r") != std::string::npos) {
        throw PreconditionError("training tokens must be non-empty and free of whitespace");
      }
      add(m.intern(word));
    }
    add(kEnd);
  }
  if (m.trigrams_.empty()) throw PreconditionError("language model training data is empty");
  m.rebuild(pinned);
  return m;
}

void NGramModel::rebuild(std::optional<Discounts> pinned) {
  contexts3_.clear();
  continuation2_.clear();
  contexts2_.clear();
  continuation1_.assign(vocab_.size(), 0);
  unigram_ = {};

  std::uint64_t n1[3] = {0, 0, 0};
  std::uint64_t n2[3] = {0, 0, 0};
  auto tally = [&](int order, std::uint32_t count) {
    if (count == 1) ++n1[order];
    if (count == 2) ++n2[order];
  };

  for (const auto& [key, count] : trigrams_) {
    const Id u = static_cast<Id>(key >> 42);
    const Id v = static_cast<Id>((key >> 21) & (kMaxIds - 1));
    const Id w = static_cast<Id>(key & (kMaxIds - 1));
    auto& ctx = contexts3_[key2(u, v)];
    ctx.total += count;
    ++ctx.types;
    ++continuation2_[key2(v, w)];
    tally(2, count);
  }
  for (const auto& [key, count] : continuation2_) {
    const Id v = static_cast<Id>(key >> 32);
    const Id w = static_cast<Id>(key & 0xffffffffu);
    auto& ctx = contexts2_[v];
    ctx.total += count;
    ++ctx.types;
    ++continuation1_[w];
    tally(1, count);
  }
  for (auto count : continuation1_) {
    if (count == 0) continue;
    unigram_.total += count;
    ++unigram_.types;
    tally(0, count);
  }

  if (pinned) {
    for (double d : *pinned) {
      if (!(d > 0.0 && d <= 1.0)) throw PreconditionError("discounts must lie in (0, 1]");
    }
    discounts_ = *pinned;
  } else {
    for (int k = 0; k < 3; ++k) discounts_[k] = discount_from_counts(n1[k], n2[k]);
  }
}

double NGramModel::prob_unigram(Id w) const {
  const double d = discounts_[0];
  const double total = unigram_.total;
  const double predictable = static_cast<double>(vocab_.size() - 1);
  const double c = w < continuation1_.size() ? continuation1_[w] : 0.0;
  return (std::max(c - d, 0.0) + d * unigram_.types / predictable) / total;
}

double NGramModel::prob_bigram(Id w, Id v) const {
  const auto ctx = contexts2_.find(v);
  if (ctx == contexts2_.end()) return prob_unigram(w);
  const double d = discounts_[1];
  const auto it = continuation2_.find(key2(v, w));
  const double c = it == continuation2_.end() ? 0.0 : it->second;
  return (std::max(c - d, 0.0) + d * ctx->second.types * prob_unigram(w)) /
         ctx->second.total;
}

double NGramModel::prob_ids(Id w, Id u, Id v) const {
  const auto ctx = contexts3_.find(key2(u, v));
  if (ctx == contexts3_.end()) return prob_bigram(w, v);
  const double d = discounts_[2];
  const auto it = trigrams_.find(key3(u, v, w));
  const double c = it == trigrams_.end() ? 0.0 : it->second;
  return (std::max(c - d, 0.0) + d * ctx->second.types * prob_bigram(w, v)) /
         ctx->second.total;
}

double NGramModel::probability(std::string_view word, std::string_view u,
                               std::string_view v) const {
  auto history = [&](std::string_view h) {
    return h == kSentenceStart ? kStart : lookup(h);
  };
  return prob_ids(lookup(word), history(u), history(v));
}

std::vector<std::string> NGramModel::predictable_tokens() const {
  return {vocab_.begin() + 1, vocab_.end()};
}

std::vector<std::pair<std::string, std::string>> NGramModel::observed_contexts() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [key, ctx] : contexts3_) {
    out.emplace_back(vocab_[key >> 32], vocab_[key & 0xffffffffu]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void NGramModel::score_sentence(const Sentence& sentence, std::vector<double>& log2_probs) const {
  if (sentence.empty()) return;
  Id u = kStart, v = kStart;
  auto score = [&](Id w) {
    log2_probs.push_back(std::log2(prob_ids(w, u, v)));
    u = v;
    v = w;
  };
  for (const auto& word : sentence) score(lookup(word));
  score(kEnd);
}

void NGramModel::save(std::ostream& out) const {
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << fmt::format("discounts {} {} {}\n", discounts_[0], discounts_[1], discounts_[2]);
  out << "vocab " << vocab_.size() - kReserved << '\n';
  for (std::size_t i = kReserved; i < vocab_.size(); ++i) out << vocab_[i] << '\n';
  std::vector<std::pair<std::uint64_t, std::uint32_t>> entries(trigrams_.begin(),
                                                               trigrams_.end());
  std::sort(entries.begin(), entries.end());
  out << "trigrams " << entries.size() << '\n';
  for (const auto& [key, count] : entries) {
    out << (key >> 42) << ' ' << ((key >> 21) & (kMaxIds - 1)) << ' ' << (key & (kMaxIds - 1))
        << ' ' << count << '\n';
  }
}

NGramModel NGramModel::load(std::istream& in) {
  auto expect = [&](std::string_view what) {
    std::string word;
    if (!(in >> word) || word != what) {
      throw ParseError(fmt::format("language model file: expected '{}'", what));
    }
  };
  expect(kMagic);
  int version = 0;
  if (!(in >> version) || version != kFormatVersion) {
    throw ParseError("language model file: unsupported version");
  }
  NGramModel m;
  Discounts d{};
  expect("discounts");
  if (!(in >> d[0] >> d[1] >> d[2])) throw ParseError("language model file: bad discounts");
  std::size_t words = 0;
  expect("vocab");
  if (!(in >> words)) throw ParseError("language model file: bad vocabulary size");
  for (std::size_t i = 0; i < words; ++i) {
    std::string w;
    if (!(in >> w)) throw ParseError("language model file: truncated vocabulary");
    if (m.index_.contains(w)) throw ParseError("language model file: duplicate word " + w);
    m.intern(w);
  }
  std::size_t n = 0;
  expect("trigrams");
  if (!(in >> n)) throw ParseError("language model file: bad trigram count");
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t u = 0, v = 0, w = 0;
    std::uint32_t c = 0;
    if (!(in >> u >> v >> w >> c)) throw ParseError("language model file: truncated trigrams");
    if (u >= m.vocab_.size() || v >= m.vocab_.size() || w >= m.vocab_.size() || c == 0) {
      throw ParseError("language model file: trigram out of range");
    }
    m.trigrams_[key3(static_cast<Id>(u), static_cast<Id>(v), static_cast<Id>(w))] = c;
  }
  if (m.trigrams_.empty()) throw ParseError("language model file: no trigrams");
  try {
    m.rebuild(d);
  } catch (const PreconditionError& e) {
    throw ParseError(std::string("language model file: ") + e.what());
  }
  return m;
}

double perplexity_from_log2(double log2_sum, double normalizer) {
  return std::exp2(-log2_sum / normalizer);
}

Perplexity perplexity(const NGramModel& model, std::span<const Sentence> sentences,
                      std::optional<double> normalizer) {
  std::vector<double> scores;
  for (const auto& s : sentences) model.score_sentence(s, scores);
  if (scores.empty()) throw PreconditionError("perplexity of an empty token stream");
  Perplexity p;
  p.tokens = scores.size();
  for (double s : scores) p.log2_sum += s;
  p.value = perplexity_from_log2(p.log2_sum, normalizer.value_or(static_cast<double>(p.tokens)));
  return p;
}

}  // namespace cogspeech::lm
