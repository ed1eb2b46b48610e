// Copyright 2026 The asrkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "asrkit/metrics.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <random>

#include "asrkit/error.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace asrkit;

namespace {

using Tokens = std::vector<std::string>;

// Textbook recursion with memoization on (i, j).
std::size_t RecursiveLevenshtein(const Tokens& a, const Tokens& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> lev =
      [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == 0) return j;
    if (j == 0) return i;
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    const std::size_t best =
        std::min({lev(i - 1, j) + 1, lev(i, j - 1) + 1,
                  lev(i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1)});
    memo[key] = best;
    return best;
  };
  return lev(a.size(), b.size());
}

std::vector<Tokens> AllStrings(int max_len, const Tokens& alphabet) {
  std::vector<Tokens> out{{}};
  std::vector<Tokens> frontier{{}};
  for (int len = 1; len <= max_len; ++len) {
    std::vector<Tokens> next;
    for (const Tokens& s : frontier) {
      for (const std::string& c : alphabet) {
        Tokens t = s;
        t.push_back(c);
        next.push_back(t);
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

UtteranceRecord Rec(std::string id, std::string text) {
  UtteranceRecord r;
  r.id = std::move(id);
  r.audio_path = "a.wav";
  r.duration_s = 1.0;
  r.transcript = std::move(text);
  return r;
}

}  // namespace

TEST_CASE("normalize: case, punctuation, fillers") {
  NormalizerConfig all;
  all.remove_fillers = true;
  CHECK(Normalize("Uh, Hello World.", all) == Tokens{"hello", "world"});
  CHECK(Normalize("", all).empty());

  NormalizerConfig keep_fillers;
  CHECK(Normalize("GAAP um GAAP", keep_fillers) == Tokens{"gaap", "um", "gaap"});
  CHECK(Normalize("GAAP um GAAP", all) == Tokens{"gaap", "gaap"});

  NormalizerConfig raw{false, false, false, {}};
  CHECK(Normalize("  Mr. Smith's ", raw) == Tokens{"Mr.", "Smith's"});
  // Only leading/trailing punctuation goes; tokens that vanish are dropped.
  CHECK(Normalize("-- it's \"ok\" ...") == Tokens{"it's", "ok"});
}

TEST_CASE("normalize: filler set must be lowercase and punctuation-free") {
  NormalizerConfig bad;
  bad.filler_set = {"Uh"};
  CHECK_THROWS_AS(bad.Validate(), ConfigError);
  bad.filler_set = {"uh,"};
  CHECK_THROWS_AS(bad.Validate(), ConfigError);
}

TEST_CASE("edit_align: examples") {
  auto al = EditAlign(Tokens{"a", "b", "c"}, Tokens{"a", "b", "c"});
  CHECK(al.Cost() == 0);
  CHECK(al.matches == 3);

  al = EditAlign(Tokens{"a", "b", "c"}, Tokens{"a", "c"});
  CHECK(al.deletions == 1);
  CHECK(al.substitutions == 0);
  CHECK(al.insertions == 0);
  REQUIRE(al.ops.size() == 3);
  CHECK(al.ops[1].op == EditOp::kDelete);
  CHECK(al.ops[1].ref_index == 1u);

  al = EditAlign(Tokens{}, Tokens{"x"});
  CHECK(al.insertions == 1);
  CHECK(al.ref_length == 0);
}

TEST_CASE("edit_align: tie-break prefers substitution over delete+insert") {
  // "a" vs "b": one substitution, never a deletion plus an insertion.
  const auto al = EditAlign(Tokens{"a"}, Tokens{"b"});
  CHECK(al.substitutions == 1);
  CHECK(al.ops.size() == 1);
}

TEST_CASE("edit_align: matches recursive Levenshtein on all short strings") {
  const auto strings = AllStrings(4, {"x", "y", "z"});
  for (const Tokens& a : strings) {
    for (const Tokens& b : strings) {
      const auto al = EditAlign(a, b);
      const std::size_t expected = RecursiveLevenshtein(a, b);
      REQUIRE(al.Cost() == expected);
      REQUIRE(EditDistance(a, b) == expected);
      REQUIRE(al.substitutions + al.deletions + al.matches == a.size());
      REQUIRE(testing::Replays(al, a, b));
    }
  }
}

TEST_CASE("wer: corpus-level aggregation") {
  auto al = EditAlign(Tokens{"the", "cat", "sat"}, Tokens{"the", "cat"});
  std::vector<EditAlignment> one{al};
  CHECK(AggregateWer(one).Wer() == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  // (N=3, 1 error) and (N=1, 1 error): 2/4, not the mean 2/3.
  std::vector<EditAlignment> two{
      EditAlign(Tokens{"a", "b", "c"}, Tokens{"a", "x", "c"}),
      EditAlign(Tokens{"d"}, Tokens{})};
  CHECK(AggregateWer(two).Wer() == 0.5);

  std::vector<EditAlignment> same{EditAlign(Tokens{"a"}, Tokens{"a"})};
  CHECK(AggregateWer(same).Wer() == 0.0);

  std::vector<EditAlignment> empty_ref{EditAlign(Tokens{}, Tokens{"x"})};
  CHECK_THROWS_WITH_AS(AggregateWer(empty_ref).Wer(),
                       doctest::Contains("empty reference corpus"), DataError);
}

TEST_CASE("wer: invariant under utterance permutation") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> len(0, 6), sym(0, 3);
  std::vector<EditAlignment> als;
  for (int i = 0; i < 50; ++i) {
    Tokens a, b;
    for (int k = len(rng); k > 0; --k) a.push_back(std::string(1, 'a' + sym(rng)));
    for (int k = len(rng); k > 0; --k) b.push_back(std::string(1, 'a' + sym(rng)));
    als.push_back(EditAlign(a, b));
  }
  const WerCounts before = AggregateWer(als);
  std::shuffle(als.begin(), als.end(), rng);
  const WerCounts after = AggregateWer(als);
  CHECK(before.Wer() == after.Wer());
}

TEST_CASE("freq table: common set from cumulative coverage") {
  std::vector<UtteranceRecord> corpus{Rec("s1", "a a a a a a a a a b")};
  const auto table = BuildFreqTable(corpus, {}, 0.9);
  CHECK(table.total() == 10);
  CHECK(table.common_set_size() == 1);
  CHECK(table.IsCommon("a"));
  CHECK(table.IsRare("b"));
  CHECK(IsRareWord("b", table));
  CHECK_FALSE(IsRareWord("a", table));
  CHECK_FALSE(IsRareWord("A.", table));
  CHECK(IsRareWord("zzz", table));

  const auto everything = BuildFreqTable(corpus, {}, 1.0);
  CHECK(everything.common_set_size() == 2);
  CHECK_FALSE(everything.IsRare("b"));

  // Tie broken lexicographically.
  std::vector<UtteranceRecord> tie{Rec("s1", "b a b a b a b a b a")};
  const auto half = BuildFreqTable(tie, {}, 0.5);
  CHECK(half.common_set_size() == 1);
  CHECK(half.IsCommon("a"));
  CHECK(half.IsRare("b"));
}

TEST_CASE("freq table: errors and file round trip") {
  std::vector<UtteranceRecord> none;
  CHECK_THROWS_AS(BuildFreqTable(none, {}, 0.9), DataError);
  std::vector<UtteranceRecord> punct_only{Rec("s1", "... !!")};
  CHECK_THROWS_AS(BuildFreqTable(punct_only, {}, 0.9), DataError);
  std::vector<UtteranceRecord> corpus{Rec("s1", "x y y z z z")};
  CHECK_THROWS_AS(BuildFreqTable(corpus, {}, 0.0), ConfigError);

  const auto table = BuildFreqTable(corpus, {}, 0.9);
  const std::string json = table.ToJson();
  const auto back = WordFrequencyTable::FromJson(json);
  CHECK(back.words() == table.words());
  CHECK(back.common_set_size() == table.common_set_size());
  CHECK(back.ToJson() == json);
  CHECK(WordFrequencyTable::FromJson(json, 0.5).common_set_size() == 1);
  CHECK_THROWS_AS(
      WordFrequencyTable::FromJson(R"({"coverage":0.9,"total":3,"words":[{"w":"a","count":2}],"common_set_size":1})"),
      DataError);
}

TEST_CASE("freq table: common set grows with coverage") {
  std::mt19937_64 rng(3);
  std::vector<std::pair<std::string, std::uint64_t>> counts;
  std::uniform_int_distribution<int> c(0, 40);
  for (int i = 0; i < 60; ++i) counts.emplace_back("w" + std::to_string(i), c(rng));
  std::size_t previous = 0;
  for (int step = 1; step <= 100; ++step) {
    const auto table = WordFrequencyTable::FromCounts(counts, step / 100.0);
    CHECK(table.common_set_size() >= previous);
    previous = table.common_set_size();
    // Minimal prefix: dropping the last common word falls below coverage.
    std::uint64_t cum = 0;
    for (std::size_t i = 0; i < table.common_set_size(); ++i) cum += table.words()[i].second;
    CHECK(static_cast<double>(cum) >= step / 100.0 * table.total() - 1e-9);
    if (table.common_set_size() > 0) {
      const auto last = table.words()[table.common_set_size() - 1].second;
      CHECK(static_cast<double>(cum - last) < step / 100.0 * table.total());
    }
  }
}

TEST_CASE("rare wer: hand-aligned examples on the a:9/b:1 table") {
  std::vector<UtteranceRecord> corpus{Rec("s1", "a a a a a a a a a b")};
  const auto table = BuildFreqTable(corpus, {}, 0.9);
  const auto score = [&](std::string ref, std::string hyp) {
    std::vector<UtteranceRecord> r{Rec("u", std::move(ref))};
    std::vector<UtteranceRecord> h{Rec("u", std::move(hyp))};
    return Score(r, h, {}, &table);
  };
  auto s = score("a b", "a");
  CHECK(s.rare->deletions == 1);
  CHECK(s.rare->rare_ref_words == 1);
  CHECK(s.rare->RareWer() == 1.0);

  s = score("a b", "a b");
  CHECK(s.rare->RareWer() == 0.0);

  s = score("a b", "x b");
  CHECK(s.rare->substitutions == 0);
  CHECK(s.rare->RareWer() == 0.0);
  CHECK(s.wer.substitutions == 1);

  // Insertions next to a rare word are not rare errors.
  s = score("b", "q b q");
  CHECK(s.rare->RareWer() == 0.0);
  CHECK(s.wer.insertions == 2);

  s = score("a a", "a");
  CHECK_THROWS_WITH_AS(s.rare->RareWer(), doctest::Contains("N_r=0"), DataError);
}

TEST_CASE("score: ids must join and fillers can be ignored") {
  std::vector<UtteranceRecord> ref{Rec("u1", "the gaap number"), Rec("u2", "yes")};
  std::vector<UtteranceRecord> hyp{Rec("u2", "uh yes"), Rec("u1", "um the gaap number")};
  NormalizerConfig plain;
  const auto with_fillers = Score(ref, hyp, plain, nullptr);
  CHECK(with_fillers.wer.insertions == 2);
  NormalizerConfig no_fillers;
  no_fillers.remove_fillers = true;
  CHECK(Score(ref, hyp, no_fillers, nullptr).wer.Wer() == 0.0);

  std::vector<UtteranceRecord> missing{Rec("u1", "the gaap number")};
  CHECK_THROWS_AS(Score(ref, missing, plain, nullptr), DataError);
  std::vector<UtteranceRecord> extra{Rec("u1", "x"), Rec("u2", "y"), Rec("u3", "z")};
  CHECK_THROWS_AS(Score(ref, extra, plain, nullptr), DataError);
}

TEST_CASE("score: per-utterance rare errors never exceed rare slots") {
  std::mt19937_64 rng(9);
  std::vector<UtteranceRecord> corpus;
  std::uniform_int_distribution<int> sym(0, 9), len(1, 10);
  for (int i = 0; i < 40; ++i) {
    std::string text;
    for (int k = len(rng); k > 0; --k) text += "w" + std::to_string(sym(rng) * sym(rng)) + " ";
    corpus.push_back(Rec("c" + std::to_string(i), text));
  }
  const auto table = BuildFreqTable(corpus, {}, 0.9);
  for (int i = 0; i + 1 < 40; ++i) {
    const auto ref = Normalize(corpus[i].transcript);
    const auto hyp = Normalize(corpus[i + 1].transcript);
    const auto rare = CountRareErrors(EditAlign(ref, hyp), ref, table);
    CHECK(rare.substitutions + rare.deletions <= rare.rare_ref_words);
  }
}
