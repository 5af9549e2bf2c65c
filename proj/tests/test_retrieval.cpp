#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mve/error.hpp"
#include "mve/retrieval.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace mve;
using namespace mve::testing;

namespace {

QueryRepresentation query_of(std::string_view text, std::size_t q_len, std::size_t dim = 8) {
  return represent_query(text, q_len, ToyEmbedder(dim, 42));
}

Lexicon lexicon_of(const std::vector<CorpusDocument>& docs) { return build_lexicon(docs); }

Lexicon random_lexicon(Rng& rng) {
  std::unordered_map<TokenId, LexiconEntry> entries;
  for (TokenId id = kFirstWordpieceId; id < kFirstWordpieceId + 50; ++id) {
    if (rng.below(5) == 0) continue;  // some tokens stay unseen
    const std::uint64_t df = 1 + rng.below(20);
    entries[id] = LexiconEntry{df + rng.below(4), df};
  }
  return Lexicon(std::move(entries), 40);
}

std::shared_ptr<const EmbeddingStore> store_of(const std::vector<DocumentEntry>& docs) {
  return std::make_shared<const EmbeddingStore>(EmbeddingStore::from_documents(docs));
}

Embedding vec(std::vector<float> v) { return Embedding(std::move(v)); }

}  // namespace

TEST_CASE("strategy names round trip") {
  for (Strategy s : {Strategy::kFirst, Strategy::kIcf, Strategy::kIdf}) {
    CHECK(parse_strategy(to_string(s)) == s);
  }
  CHECK(parse_strategy("Icf") == Strategy::kIcf);
  CHECK_FALSE(parse_strategy("bm25").has_value());
}

TEST_CASE("FIRST keeps occurrence order") {
  const Lexicon lex = lexicon_of({{"a", "the cat"}, {"b", "the zebra"}});
  const auto q = query_of("the zebra", 5);
  CHECK(order_embeddings(q, lex, Strategy::kFirst) == std::vector<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("ICF puts the rarest wordpiece first, then CLS, then MASK") {
  const Lexicon lex = lexicon_of({{"a", "the cat"}, {"b", "the dog"}, {"c", "the zebra"}});
  const auto q = query_of("the zebra", 5);
  REQUIRE(q.tokens[1].surface == "the");
  REQUIRE(q.tokens[2].surface == "zebra");
  // [zebra, the, CLS, MASK, MASK]
  CHECK(order_embeddings(q, lex, Strategy::kIcf) == std::vector<std::size_t>{2, 1, 0, 3, 4});
  CHECK(order_embeddings(q, lex, Strategy::kIdf) == std::vector<std::size_t>{2, 1, 0, 3, 4});
}

TEST_CASE("ICF ranks unseen tokens ahead of seen ones and keeps ties stable") {
  const Lexicon lex = lexicon_of({{"a", "cat dog"}, {"b", "cat dog"}});
  // cf(cat) == cf(dog) == 2, "okapi" unseen
  const auto q = query_of("dog cat okapi", 6);
  CHECK(order_embeddings(q, lex, Strategy::kIcf) == std::vector<std::size_t>{3, 1, 2, 0, 4, 5});
}

TEST_CASE("ICF and IDF diverge when cf and df disagree") {
  // "aa" appears 4 times in one doc (cf 4, df 1); "bb" once in each of two docs (cf 2, df 2)
  const Lexicon lex = lexicon_of({{"a", "aa aa aa aa"}, {"b", "bb"}, {"c", "bb"}});
  const auto q = query_of("aa bb", 4);
  CHECK(order_embeddings(q, lex, Strategy::kIcf) == std::vector<std::size_t>{2, 1, 0, 3});
  CHECK(order_embeddings(q, lex, Strategy::kIdf) == std::vector<std::size_t>{1, 2, 0, 3});
}

TEST_CASE("ordering is a permutation with the class layout for random queries") {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const Lexicon lex = random_lexicon(rng);
    const std::size_t q_len = 2 + rng.below(31);
    const auto q = random_query(q_len, rng.below(q_len + 3), 4, rng);
    for (Strategy s : {Strategy::kFirst, Strategy::kIcf, Strategy::kIdf}) {
      const auto order = order_embeddings(q, lex, s);
      std::vector<std::size_t> sorted = order;
      std::sort(sorted.begin(), sorted.end());
      std::vector<std::size_t> identity(q.size());
      std::iota(identity.begin(), identity.end(), std::size_t{0});
      REQUIRE(sorted == identity);
      if (s == Strategy::kFirst) {
        CHECK(order == identity);
        continue;
      }
      const std::size_t w = q.num_wordpieces();
      for (std::size_t i = 0; i < order.size(); ++i) {
        const TokenKind kind = q.tokens[order[i]].kind;
        if (i < w) CHECK(kind == TokenKind::kWordpiece);
        else if (i == w) CHECK(kind == TokenKind::kCls);
        else CHECK(kind == TokenKind::kMask);
      }
      for (std::size_t i = 1; i < w; ++i) {
        const TokenId a = q.tokens[order[i - 1]].id, b = q.tokens[order[i]].id;
        if (s == Strategy::kIcf) {
          CHECK(lex.cf(a) <= lex.cf(b));
          if (lex.cf(a) == lex.cf(b)) CHECK(order[i - 1] < order[i]);
        } else {
          CHECK(lex.df(a) <= lex.df(b));
          if (lex.df(a) == lex.df(b)) CHECK(order[i - 1] < order[i]);
        }
      }
      for (std::size_t i = w + 2; i < order.size(); ++i) CHECK(order[i - 1] < order[i]);
    }
  }
}

TEST_CASE("exhaustive ANN returns every embedding ranked by score") {
  const auto store = store_of(random_documents(20, 1, 6, 8, 3));
  const IvfIndex index = build_ivf(store, train_centroids(*store, 1.0, 4, 5, 1));
  Rng rng(9);
  const auto q = random_unit_vector(8, rng);
  const auto result = ann_candidates(index, q, store->num_embeddings() + 10, 4);
  REQUIRE(result.hits.size() == store->num_embeddings());
  std::vector<EmbeddingId> ids;
  for (const auto& h : result.hits) ids.push_back(h.id);
  CHECK(ids == brute_force_topk(*store, q, all_ids(*store), store->num_embeddings()));
  std::vector<DocNo> all_docs(store->num_docs());
  std::iota(all_docs.begin(), all_docs.end(), DocNo{0});
  CHECK(result.docs == all_docs);
}

TEST_CASE("k_prime 1 returns the single best embedding") {
  std::vector<DocumentEntry> docs(2);
  docs[0].doc_id = "x";
  docs[0].embeddings = {vec({1, 0}), vec({0, 1})};
  docs[1].doc_id = "y";
  docs[1].embeddings = {vec({0.6f, 0.8f})};
  const auto store = store_of(docs);
  const IvfIndex index = build_ivf(store, train_centroids(*store, 1.0, 1, 1, 1));
  const std::vector<float> phi{0.6f, 0.8f};
  const auto r = ann_candidates(index, phi, 1, 1);
  REQUIRE(r.hits.size() == 1);
  CHECK(r.hits[0].id == 2);
  CHECK(r.docs == std::vector<DocNo>{1});
}

TEST_CASE("ANN ties break by ascending embedding id") {
  std::vector<DocumentEntry> docs(3);
  for (int i = 0; i < 3; ++i) {
    docs[i].doc_id = std::string(1, static_cast<char>('a' + i));
    docs[i].embeddings = {vec({1, 0})};
  }
  const auto store = store_of(docs);
  const IvfIndex index = build_ivf(store, train_centroids(*store, 1.0, 1, 1, 1));
  const std::vector<float> phi{1, 0};
  const auto r = ann_candidates(index, phi, 2, 1);
  REQUIRE(r.hits.size() == 2);
  CHECK(r.hits[0].id == 0);
  CHECK(r.hits[1].id == 1);
}

TEST_CASE("partial probing matches brute force over the probed lists") {
  const auto store = store_of(random_documents(40, 5, 5, 8, 77));
  REQUIRE(store->num_embeddings() == 200);
  const IvfIndex index = build_ivf(store, train_centroids(*store, 1.0, 4, 10, 3));
  Rng rng(100);
  for (int trial = 0; trial < 50; ++trial) {
    const auto q = random_unit_vector(8, rng);
    // independently pick the two best centroids
    std::vector<std::pair<double, std::size_t>> cs;
    for (std::size_t c = 0; c < 4; ++c) cs.emplace_back(-dot_f64(q, index.centroids().centroid(c)), c);
    std::sort(cs.begin(), cs.end());
    std::vector<EmbeddingId> probed;
    for (int i = 0; i < 2; ++i) {
      const auto& ids = index.lists()[cs[i].second].ids;
      probed.insert(probed.end(), ids.begin(), ids.end());
    }
    for (std::size_t k : {1u, 7u, 30u, 500u}) {
      const auto r = ann_candidates(index, q, k, 2);
      std::vector<EmbeddingId> ids;
      for (const auto& h : r.hits) ids.push_back(h.id);
      CHECK(ids == brute_force_topk(*store, q, probed, k));
      std::set<DocNo> docs;
      for (EmbeddingId id : ids) docs.insert(store->doc_of(id));
      CHECK(r.docs == std::vector<DocNo>(docs.begin(), docs.end()));
    }
  }
}

TEST_CASE("ANN argument errors") {
  const auto store = store_of(random_documents(10, 2, 2, 4, 1));
  const IvfIndex index = build_ivf(store, train_centroids(*store, 1.0, 2, 3, 1));
  const std::vector<float> q{1, 0, 0, 0};
  CHECK_THROWS_AS(ann_candidates(index, q, 0, 1), InvalidConfig);
  CHECK_THROWS_AS(ann_candidates(index, q, 5, 0), InvalidConfig);
  CHECK_THROWS_AS(ann_candidates(index, q, 5, 3), InvalidConfig);
  const std::vector<float> wrong{1, 0, 0};
  CHECK_THROWS_AS(ann_candidates(index, wrong, 5, 1), InvalidInput);
}

TEST_CASE("pruned union of the first p embeddings") {
  const std::vector<EmbeddingCandidates> per{{4, {1, 2}}, {0, {2, 3}}, {7, {5}}};
  const auto u1 = pruned_union(per, 1);
  CHECK(u1.docs() == std::vector<DocNo>{1, 2});
  const auto u2 = pruned_union(per, 2);
  CHECK(u2.docs() == std::vector<DocNo>{1, 2, 3});
  CHECK(u2.provenance(2) == std::vector<std::size_t>{0, 4});
  CHECK(u2.provenance(5).empty());
  CHECK(pruned_union(per, 3).size() == 4);
  CHECK_THROWS_AS(pruned_union(per, 0), InvalidConfig);
  CHECK_THROWS_AS(pruned_union(per, 4), InvalidConfig);
}

TEST_CASE("pruned union grows monotonically and equals the full union at the end") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(32);
    std::vector<EmbeddingCandidates> per(n);
    std::set<DocNo> full;
    for (std::size_t i = 0; i < n; ++i) {
      per[i].position = (i * 7) % n;
      std::set<DocNo> docs;
      const std::size_t m = rng.below(10);
      for (std::size_t j = 0; j < m; ++j) docs.insert(static_cast<DocNo>(rng.below(60)));
      per[i].docs.assign(docs.begin(), docs.end());
      full.insert(docs.begin(), docs.end());
    }
    std::vector<DocNo> prev;
    for (std::size_t p = 1; p <= n; ++p) {
      const auto docs = pruned_union(per, p).docs();
      CHECK(std::includes(docs.begin(), docs.end(), prev.begin(), prev.end()));
      prev = docs;
    }
    CHECK(prev == std::vector<DocNo>(full.begin(), full.end()));
  }
}

TEST_CASE("exact score worked examples") {
  const std::vector<Embedding> q{vec({1, 0}), vec({0, 1})};
  std::vector<float> d1{0.6f, 0.8f};
  CHECK(exact_score(q, MatrixView{d1.data(), 1, 2}) == doctest::Approx(1.4));
  std::vector<float> d2{1, 0, 0, 1};
  CHECK(exact_score(q, MatrixView{d2.data(), 2, 2}) == doctest::Approx(2.0));
  std::vector<float> d3{-1, 0};
  CHECK(exact_score(q, MatrixView{d3.data(), 1, 2}) == doctest::Approx(-1.0));
}

TEST_CASE("exact score agrees with the dense similarity matrix") {
  Rng rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t dim = 1 + rng.below(64);
    const auto q = random_query(2 + rng.below(31), rng.below(10), dim, rng);
    std::vector<Embedding> doc;
    const std::size_t len = 1 + rng.below(40);
    for (std::size_t j = 0; j < len; ++j) doc.push_back(random_embedding(dim, rng));
    DocumentEntry entry{"d", doc, {}};
    const double expected = maxsim_dense(rows_of(q.embeddings), rows_of(doc));
    const double got = exact_score(q, entry);
    CHECK(std::abs(got - expected) <= 1e-5 * std::max(1.0, std::abs(expected)));
  }
}

TEST_CASE("exact score is monotone in the document and invariant to row order") {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const auto q = random_query(8, 3, 6, rng);
    std::vector<Embedding> doc;
    for (int j = 0; j < 5; ++j) doc.push_back(random_embedding(6, rng));
    const float base = exact_score(q, DocumentEntry{"d", doc, {}});
    auto bigger = doc;
    bigger.push_back(random_embedding(6, rng));
    CHECK(exact_score(q, DocumentEntry{"d", bigger, {}}) >= base);
    auto shuffled = doc;
    std::reverse(shuffled.begin(), shuffled.end());
    CHECK(exact_score(q, DocumentEntry{"d", shuffled, {}}) == base);
  }
}

TEST_CASE("exact score rejects empty documents and dimension mismatches") {
  const std::vector<Embedding> q{vec({1, 0})};
  CHECK_THROWS_AS(exact_score(q, MatrixView{nullptr, 0, 2}), InvalidInput);
  std::vector<float> d{1, 0, 0};
  CHECK_THROWS_AS(exact_score(q, MatrixView{d.data(), 1, 3}), InvalidInput);
}

TEST_CASE("rerank orders by score and breaks ties by doc_id") {
  std::vector<DocumentEntry> docs(4);
  docs[0] = {"b", {vec({1, 0})}, {}};
  docs[1] = {"a", {vec({1, 0})}, {}};
  docs[2] = {"c", {vec({0, 1})}, {}};
  docs[3] = {"d", {vec({0.6f, 0.8f})}, {}};
  const auto store = store_of(docs);
  QueryRepresentation q;
  q.tokens = {Token{kClsId, "[CLS]", TokenKind::kCls, 0}, Token{kMaskId, "[MASK]", TokenKind::kMask, 1}};
  q.embeddings = {vec({1, 0}), vec({1, 0})};
  CandidateSet set;
  for (DocNo d = 0; d < 4; ++d) set.add(d, 0);
  const Ranking r = rerank(set, q, *store, 10);
  REQUIRE(r.size() == 4);
  CHECK(r.entries[0].doc_id == "a");
  CHECK(r.entries[1].doc_id == "b");
  CHECK(r.entries[2].doc_id == "d");
  CHECK(r.entries[3].doc_id == "c");
  CHECK(r.entries[2].score == doctest::Approx(1.2));
  const Ranking top2 = rerank(set, q, *store, 2);
  CHECK(top2.size() == 2);
  CHECK(top2.depth == 2);
  CHECK(top2.entries[1].doc_id == "b");

  CandidateSet bogus;
  bogus.add(9, 0);
  CHECK_THROWS_AS(rerank(bogus, q, *store, 10), InternalConsistency);
  CHECK(rerank(CandidateSet{}, q, *store, 10).size() == 0);
}

namespace {

struct SmallEngine {
  std::vector<CorpusDocument> corpus;
  Lexicon lexicon;
  IvfIndex index;
  ToyEmbedder embedder{64, 42};

  SmallEngine() {
    Rng rng(2);
    for (int d = 0; d < 60; ++d) {
      std::string text;
      for (int w = 0; w < 12; ++w) text += "w" + std::to_string(rng.below(40)) + " ";
      text += "unique" + std::to_string(d);
      corpus.push_back({"doc" + std::to_string(d), text});
    }
    std::vector<DocumentEntry> entries;
    for (const auto& c : corpus) entries.push_back(embed_document(c, embedder));
    lexicon = build_lexicon(corpus);
    auto store = store_of(entries);
    index = build_ivf(store, train_centroids(*store, 0.5, 6, 10, 42));
  }
};

}  // namespace

TEST_CASE("search finds the document holding a unique query term") {
  const SmallEngine e;
  const Searcher searcher(e.index, e.lexicon, e.embedder, 4);
  for (int d = 0; d < 60; ++d) {
    const auto r = searcher.search("unique" + std::to_string(d), PruningConfig{Strategy::kIcf, 1, 5, 6}, 10);
    REQUIRE(r.ranking.size() >= 1);
    CHECK(r.ranking.entries[0].doc_id == "doc" + std::to_string(d));
  }
}

TEST_CASE("search invariants") {
  const SmallEngine e;
  const std::size_t q_len = 8;
  const Searcher searcher(e.index, e.lexicon, e.embedder, q_len);
  const auto q = searcher.represent("w1 w5 w9 unique4");
  for (Strategy s : {Strategy::kFirst, Strategy::kIcf, Strategy::kIdf}) {
    std::vector<DocNo> prev;
    for (std::size_t p = 1; p <= q_len; ++p) {
      const PruningConfig cfg{s, p, 20, 3};
      const auto r = searcher.search(q, cfg, 15);
      CHECK(r.candidates.size() <= p * cfg.k_prime);
      CHECK(r.ranking.size() == std::min<std::size_t>(15, r.candidates.size()));
      const auto docs = r.candidates.docs();
      CHECK(std::includes(docs.begin(), docs.end(), prev.begin(), prev.end()));
      prev = docs;
      for (const auto& entry : r.ranking.entries) {
        CHECK(r.candidates.contains(entry.doc));
        CHECK(entry.score == exact_score(q, e.index.store().document(entry.doc)));
      }
    }
    // p = q_len is strategy independent
    const auto per = per_embedding_candidates(e.index, q, 20, 3);
    CHECK(prev == pruned_union(per, q_len).docs());
  }
}

TEST_CASE("search rejects invalid pruning parameters") {
  const SmallEngine e;
  const Searcher searcher(e.index, e.lexicon, e.embedder, 8);
  try {
    searcher.search("w1", PruningConfig{Strategy::kIcf, 0, 10, 2}, 10);
    FAIL("expected InvalidConfig");
  } catch (const InvalidConfig& err) {
    CHECK(std::string(err.what()).find("1 <= p <= q_len") != std::string::npos);
  }
  CHECK_THROWS_AS(searcher.search("w1", PruningConfig{Strategy::kIcf, 9, 10, 2}, 10), InvalidConfig);
  CHECK_THROWS_AS(searcher.search("w1", PruningConfig{Strategy::kIcf, 2, 0, 2}, 10), InvalidConfig);
  CHECK_THROWS_AS(searcher.search("w1", PruningConfig{Strategy::kIcf, 2, 10, 7}, 10), InvalidConfig);
  CHECK_THROWS_AS(searcher.search("   ", PruningConfig{Strategy::kIcf, 2, 10, 2}, 10), InvalidInput);
  CHECK_THROWS_AS(Searcher(e.index, e.lexicon, ToyEmbedder(16, 42), 8), InvalidConfig);
}
