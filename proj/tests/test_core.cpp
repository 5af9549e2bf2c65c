#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <map>
#include <set>
#include <sstream>

#include "mve/core.hpp"
#include "mve/error.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace mve;

namespace {

std::vector<std::string> surfaces(const std::vector<Token>& tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens) out.push_back(t.surface);
  return out;
}

}  // namespace

TEST_CASE("tokenize lowercases, splits on whitespace and strips punctuation") {
  CHECK(tokenize("Why do Zebras\thave  stripes?") ==
        std::vector<std::string>{"why", "do", "zebras", "have", "stripes"});
  CHECK(tokenize("  ...  ") == std::vector<std::string>{});
  CHECK(tokenize("don't stop") == std::vector<std::string>{"dont", "stop"});
  // U+00A0 and U+3000 separate words; non-ASCII letters are kept
  CHECK(tokenize("caf\xC3\xA9\xC2\xA0noir\xE3\x80\x80x") ==
        std::vector<std::string>{"caf\xC3\xA9", "noir", "x"});
}

TEST_CASE("tokenize_and_augment pads with MASK to q_len") {
  const auto tokens = tokenize_and_augment("why do zebras have stripes", 8);
  CHECK(surfaces(tokens) == std::vector<std::string>{"[CLS]", "why", "do", "zebras", "have",
                                                     "stripes", "[MASK]", "[MASK]"});
  CHECK(tokens[0].kind == TokenKind::kCls);
  CHECK(tokens[0].id == kClsId);
  CHECK(tokens[6].kind == TokenKind::kMask);
  CHECK(tokens[7].id == kMaskId);
  for (std::size_t i = 0; i < tokens.size(); ++i) CHECK(tokens[i].position == i);
  CHECK(tokens[3].id == token_id("zebras"));
}

TEST_CASE("tokenize_and_augment with no room for padding") {
  const auto tokens = tokenize_and_augment("a", 2);
  CHECK(surfaces(tokens) == std::vector<std::string>{"[CLS]", "a"});
}

TEST_CASE("tokenize_and_augment truncates long queries") {
  std::string text;
  std::vector<std::string> words;
  for (int i = 0; i < 40; ++i) {
    words.push_back("word" + std::to_string(i));
    text += words.back() + " ";
  }
  const auto tokens = tokenize_and_augment(text, 32);
  REQUIRE(tokens.size() == 32);
  CHECK(tokens[0].kind == TokenKind::kCls);
  for (std::size_t i = 1; i < 32; ++i) {
    CHECK(tokens[i].kind == TokenKind::kWordpiece);
    CHECK(tokens[i].surface == words[i - 1]);
  }
  CHECK(tokens[31].surface == "word30");
}

TEST_CASE("tokenize_and_augment errors") {
  CHECK_THROWS_AS(tokenize_and_augment("   ", 8), InvalidInput);
  CHECK_THROWS_AS(tokenize_and_augment("?!", 8), InvalidInput);
  CHECK_THROWS_AS(tokenize_and_augment("hello", 1), InvalidConfig);
}

TEST_CASE("augmented queries always have q_len tokens with one leading CLS and a MASK suffix") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t q_len = 2 + rng.below(40);
    const std::size_t n_words = 1 + rng.below(60);
    std::string text;
    for (std::size_t i = 0; i < n_words; ++i) text += "t" + std::to_string(rng.below(30)) + " ";
    const auto tokens = tokenize_and_augment(text, q_len);
    REQUIRE(tokens.size() == q_len);
    std::size_t cls = 0;
    bool in_mask = false;
    for (const auto& t : tokens) {
      if (t.kind == TokenKind::kCls) ++cls;
      if (t.kind == TokenKind::kMask) in_mask = true;
      if (in_mask) CHECK(t.kind == TokenKind::kMask);
    }
    CHECK(cls == 1);
    CHECK(tokens[0].kind == TokenKind::kCls);
    CHECK(tokens.size() - 1 - std::min(n_words, q_len - 1) ==
          static_cast<std::size_t>(std::count_if(tokens.begin(), tokens.end(), [](const Token& t) {
            return t.kind == TokenKind::kMask;
          })));
  }
}

TEST_CASE("token ids are stable and skip the reserved range") {
  CHECK(token_id("zebra") == token_id("zebra"));
  CHECK(token_id("zebra") != token_id("stripes"));
  CHECK(token_id("") >= kFirstWordpieceId);
  CHECK(document_tokens("Zebra zebra")[0].id == document_tokens("zebra")[0].id);
}

TEST_CASE("embed_tokens is deterministic and normalized") {
  const auto tokens = tokenize_and_augment("zebra stripes zebra", 6);
  const auto a = embed_tokens(tokens, 42, 16);
  const auto b = embed_tokens(tokens, 42, 16);
  REQUIRE(a.size() == 6);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::memcmp(a[i].data(), b[i].data(), 16 * sizeof(float)) == 0);
    double n2 = 0.0;
    for (float v : a[i].values()) n2 += double(v) * v;
    CHECK(std::fabs(std::sqrt(n2) - 1.0) < 1e-6);
  }
  // same id at two positions, and all MASK slots, share a vector
  CHECK(a[1] == a[3]);
  CHECK(a[4] == a[5]);
  CHECK_FALSE(a[0] == a[4]);
  // a different seed changes the vectors
  CHECK_FALSE(embed_tokens(tokens, 43, 16)[1] == a[1]);
}

TEST_CASE("distinct tokens get dissimilar toy embeddings") {
  const ToyEmbedder embedder(16, 42);
  const auto zebra = embedder.embed(token_id("zebra"));
  const auto stripes = embedder.embed(token_id("stripes"));
  const double cosine = testing::dot_f64(zebra.values(), stripes.values());
  CHECK(cosine < 0.9);
}

TEST_CASE("embedder rejects dim 0") { CHECK_THROWS_AS(ToyEmbedder(0, 1), InvalidConfig); }

TEST_CASE("embedding rejects non-finite values and empty vectors") {
  CHECK_THROWS_AS(Embedding(std::vector<float>{1.0f, NAN}), InvalidInput);
  CHECK_THROWS_AS(Embedding(std::vector<float>{INFINITY}), InvalidInput);
  CHECK_THROWS_AS(Embedding(std::vector<float>{}), InvalidInput);
}

TEST_CASE("query representation validation") {
  const ToyEmbedder embedder(8, 1);
  auto q = represent_query("a b c", 6, embedder);
  CHECK_NOTHROW(q.validate());
  CHECK(q.num_wordpieces() == 3);
  auto bad = q;
  std::swap(bad.tokens[2], bad.tokens[4]);
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  bad = q;
  bad.embeddings.pop_back();
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("build_lexicon counts collection and document frequency") {
  auto doc = [](std::string id, std::vector<std::string> words) {
    DocumentEntry d;
    d.doc_id = std::move(id);
    for (const auto& w : words) {
      d.token_ids.push_back(token_id(w));
      d.embeddings.emplace_back(std::vector<float>{1.0f});
    }
    return d;
  };
  {
    const std::vector<DocumentEntry> corpus{doc("d1", {"a", "b"}), doc("d2", {"a"})};
    const Lexicon lex = build_lexicon(corpus);
    CHECK(lex.cf(token_id("a")) == 2);
    CHECK(lex.cf(token_id("b")) == 1);
    CHECK(lex.df(token_id("a")) == 2);
    CHECK(lex.df(token_id("b")) == 1);
    CHECK(lex.num_docs() == 2);
    CHECK(lex.num_tokens() == 3);
    CHECK(lex.cf(token_id("unseen")) == 0);
    CHECK_FALSE(lex.contains(kClsId));
    CHECK_FALSE(lex.contains(kMaskId));
  }
  {
    const std::vector<DocumentEntry> corpus{doc("d", {"x", "x", "x"})};
    const Lexicon lex = build_lexicon(corpus);
    CHECK(lex.cf(token_id("x")) == 3);
    CHECK(lex.df(token_id("x")) == 1);
  }
  CHECK_THROWS_AS(build_lexicon(std::span<const DocumentEntry>{}), InvalidInput);
}

TEST_CASE("lexicon on a synthetic corpus matches an independent counter") {
  Rng rng(99);
  std::vector<CorpusDocument> corpus;
  std::string stream;  // raw token stream with document separators
  for (int d = 0; d < 100; ++d) {
    std::string text;
    const std::size_t len = 1 + rng.below(30);
    for (std::size_t i = 0; i < len; ++i) {
      // skewed draw so frequencies differ
      const auto w = rng.below(1 + rng.below(60));
      text += "tok" + std::to_string(w) + (rng.below(5) == 0 ? ", " : " ");
    }
    corpus.push_back({"d" + std::to_string(d), text});
    stream += text + "\n";
  }
  const Lexicon lex = build_lexicon(std::span<const CorpusDocument>(corpus));

  // independent pass: split the raw stream by hand, count with std::map/std::set
  std::map<std::string, std::uint64_t> cf;
  std::map<std::string, std::set<int>> docs_with;
  std::uint64_t total = 0;
  int doc_no = 0;
  std::string word;
  auto emit = [&] {
    std::string clean;
    for (char c : word) {
      if (c != ',') clean.push_back(c);
    }
    if (!clean.empty()) {
      ++cf[clean];
      docs_with[clean].insert(doc_no);
      ++total;
    }
    word.clear();
  };
  for (char c : stream) {
    if (c == ' ' || c == '\n') {
      emit();
      if (c == '\n') ++doc_no;
    } else {
      word.push_back(c);
    }
  }
  CHECK(lex.num_docs() == 100);
  CHECK(lex.num_tokens() == total);
  CHECK(lex.size() == cf.size());
  std::uint64_t sum_cf = 0;
  for (const auto& [w, n] : cf) {
    CHECK(lex.cf(token_id(w)) == n);
    CHECK(lex.df(token_id(w)) == docs_with[w].size());
    sum_cf += lex.cf(token_id(w));
  }
  CHECK(sum_cf == lex.num_tokens());
  for (const auto& [id, e] : lex.entries()) {
    CHECK(e.df >= 1);
    CHECK(e.df <= std::min(e.cf, lex.num_docs()));
  }
}

TEST_CASE("lexicon TSV export and re-import") {
  const std::vector<CorpusDocument> corpus{{"a", "the cat, the hat"}, {"b", "The dog"}};
  const Lexicon lex = build_lexicon(std::span<const CorpusDocument>(corpus));
  std::ostringstream out;
  write_lexicon_tsv(lex, out);
  CHECK(out.str() == "cat\t1\t1\ndog\t1\t1\nhat\t1\t1\nthe\t3\t2\n");
  std::istringstream in(out.str());
  const Lexicon back = read_lexicon_tsv(in, 2);
  CHECK(back == lex);
  std::istringstream bad("the\tthree\t2\n");
  CHECK_THROWS_AS(read_lexicon_tsv(bad, 2), InvalidInput);
}

TEST_CASE("corpus reader") {
  std::istringstream in("d1\tHello world\r\n\nd2\tsecond doc\n");
  const auto docs = read_corpus(in);
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].doc_id == "d1");
  CHECK(docs[0].text == "Hello world");
  std::istringstream dup("d1\tx\nd1\ty\n");
  CHECK_THROWS_AS(read_corpus(dup), InvalidInput);
  std::istringstream notab("just text\n");
  CHECK_THROWS_AS(read_corpus(notab), InvalidInput);
}

TEST_CASE("embed_document keeps embeddings and token ids parallel") {
  const ToyEmbedder embedder(16, 7);
  const auto doc = embed_document({"d", "One two two"}, embedder);
  CHECK(doc.embeddings.size() == 3);
  CHECK(doc.token_ids.size() == 3);
  CHECK(doc.embeddings[1] == doc.embeddings[2]);
  CHECK(doc.embeddings[0] == embedder.embed(token_id("one")));
  CHECK_THROWS_AS(embed_document({"e", " !! "}, embedder), InvalidInput);
}
