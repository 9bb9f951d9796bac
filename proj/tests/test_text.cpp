#include <doctest.h>

#include <algorithm>

#include "cogspeech/error.hpp"
#include "cogspeech/text.hpp"
#include "oracles.hpp"

using namespace cogspeech;
using namespace cogspeech::text;

namespace {

Turn turn(double a, double b, Speaker s, const std::string& utterance) {
  return Turn{a, b, s, tokenize(utterance)};
}

Transcript transcript(std::string id, std::vector<Turn> turns) {
  return Transcript{std::move(id), std::move(turns)};
}

std::vector<std::vector<std::string>> sentences_of(const Transcript& t) {
  return lm_sentences(t);
}

}  // namespace

TEST_CASE("per-turn statistics") {
  SUBCASE("30 words in 30 seconds is 60 wpm") {
    std::string words;
    for (int i = 0; i < 30; ++i) words += "w ";
    const auto s = per_turn_stats(transcript("S1", {turn(0, 30, Speaker::subject, words)}));
    CHECK(s.at("wpm_mean") == doctest::Approx(60.0));
  }
  SUBCASE("word counts 2 and 4") {
    const auto s = per_turn_stats(transcript(
        "S1", {turn(0, 1, Speaker::subject, "a b"), turn(2, 4, Speaker::subject, "a b c d")}));
    CHECK(s.at("words_sum") == 6.0);
    CHECK(s.at("words_mean") == 3.0);
    CHECK(s.at("words_median") == 3.0);
    CHECK(s.at("dur_max") == 2.0);
  }
  SUBCASE("tags and punctuation are not words") {
    const auto t = turn(0, 1, Speaker::subject, "it's <um> october ?");
    const auto expect = std::count_if(t.tokens.begin(), t.tokens.end(),
                                      [](const std::string& tok) {
                                        return tok != "<um>" && tok != "?";
                                      });
    CHECK(word_count(t) == static_cast<std::size_t>(expect));
    CHECK(word_count(t) == 2);
  }
  SUBCASE("no subject turns is an error") {
    CHECK_THROWS_AS(per_turn_stats(transcript("S1", {turn(0, 1, Speaker::tester, "hi")})),
                    PreconditionError);
  }
}

TEST_CASE("question and hesitation counts use subject turns only") {
  const auto t = transcript("S1", {turn(0, 1, Speaker::subject, "no"),
                                   turn(1, 2, Speaker::tester, "why ? really ?"),
                                   turn(2, 3, Speaker::subject, "what ? where ?")});
  const auto c = question_hesitation_counts(t);
  CHECK(c.at("q_mean") == 1.0);
  CHECK(c.at("q_sum") == 2.0);
  CHECK(c.at("um_mean") == 0.0);
  CHECK(c.at("um_sum") == 0.0);
}

TEST_CASE("vocabulary size folds case") {
  CHECK(vocabulary_size(transcript("S1", {turn(0, 1, Speaker::subject, "a b a")})) == 2);
  CHECK(vocabulary_size(transcript("S1", {turn(0, 1, Speaker::subject, "A a")})) == 1);
}

TEST_CASE("oov rate follows the set formula literally") {
  auto brute = [](const std::set<std::string>& vi, const std::set<std::string>& vo) {
    double n = 0.0;
    for (const auto& w : vo) n += vi.count(w) ? 0.0 : 1.0;
    return n / static_cast<double>(vi.size());
  };
  CHECK(oov_rate({"a", "b"}, {"b", "c", "d"}) == 1.0);
  CHECK(oov_rate({"a", "b"}, {"b", "c", "d"}) == brute({"a", "b"}, {"b", "c", "d"}));
  CHECK(oov_rate({"a", "b", "c"}, {"a", "c"}) == 0.0);
  CHECK(oov_rate({"a"}, {"a", "b", "c"}) == 2.0);
  CHECK(oov_rate({"a", "b"}, {"b", "c", "d"}, OovVariant::subject_not_others) == 0.5);
  CHECK_THROWS_AS(oov_rate({}, {"a"}), PreconditionError);

  // Monotone under inclusion of the others' vocabulary.
  std::set<std::string> others;
  double last = 0.0;
  for (const char* w : {"a", "q", "b", "r", "s"}) {
    others.insert(w);
    const double r = oov_rate({"a", "b"}, others);
    CHECK(r >= last);
    last = r;
  }
}

TEST_CASE("perplexity features") {
  const auto a = transcript("A", {turn(0, 1, Speaker::subject, "the cat sat"),
                                  turn(1, 2, Speaker::subject, "the dog sat")});
  const auto b = transcript("B", {turn(0, 1, Speaker::subject, "the cat ran"),
                                  turn(2, 3, Speaker::tester, "ignored words here")});
  const auto c = transcript("C", {turn(0, 1, Speaker::subject, "a dog ran"),
                                  turn(1, 2, Speaker::subject, "the cat sat down")});
  const std::vector<Transcript> corpus{a, b, c};

  SUBCASE("matches the enumeration oracle") {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      std::vector<std::vector<std::string>> train, held_in;
      for (std::size_t j = 0; j < corpus.size(); ++j) {
        if (j == i) continue;
        for (auto& s : sentences_of(corpus[j])) {
          train.push_back(s);
          held_in.push_back(s);
        }
      }
      const oracle::KneserNey kn(train);
      const auto p = perplexity_features(i, corpus);
      CHECK(std::abs(p.self - kn.perplexity(sentences_of(corpus[i]))) < 1e-9);
      CHECK(std::abs(p.others - kn.perplexity(held_in)) < 1e-9);
    }
  }
  SUBCASE("a subject identical to the rest of the corpus scores the same") {
    const auto twin = transcript("D", a.turns);
    const std::vector<Transcript> pair{a, twin};
    const auto p = perplexity_features(0, pair);
    CHECK(p.self == doctest::Approx(p.others).epsilon(1e-12));
  }
  SUBCASE("tester content does not matter") {
    auto b2 = b;
    b2.turns[1].tokens = tokenize("completely different words ?");
    const std::vector<Transcript> changed{a, b2, c};
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(extract_features(i, corpus).values == extract_features(i, changed).values);
    }
  }
}

TEST_CASE("21 text features, invariant to turn order") {
  const auto a = transcript("A", {turn(0, 2, Speaker::subject, "one two three ?"),
                                  turn(3, 4, Speaker::subject, "<um> four"),
                                  turn(5, 9, Speaker::subject, "five six seven eight nine")});
  const auto b = transcript("B", {turn(0, 1, Speaker::subject, "one two ten")});
  const auto f = extract_features(0, std::vector<Transcript>{a, b});
  CHECK(f.size() == 21);
  CHECK(f.names == text_feature_names());
  CHECK(f.at("vocab_size") <= f.at("words_sum"));
  CHECK(f.at("words_sum") >= f.at("words_mean"));
  for (double v : f.values) CHECK(std::isfinite(v));

  auto shuffled = a;
  std::reverse(shuffled.turns.begin(), shuffled.turns.end());
  const auto g = extract_features(0, std::vector<Transcript>{shuffled, b});
  for (const char* name : {"words_mean", "words_min", "words_max", "words_median", "words_sum",
                           "dur_mean", "dur_median", "wpm_mean", "wpm_median", "q_sum",
                           "um_mean", "vocab_size", "oov_rate"}) {
    CHECK(g.at(name) == doctest::Approx(f.at(name)).epsilon(1e-12));
  }
}
