#include "mve/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "mve/error.hpp"
#include "mve/random.hpp"

namespace mve {

Embedding::Embedding(std::vector<float> values) : values_(std::move(values)) {
  if (values_.empty()) throw InvalidInput("embedding has dimension 0");
  for (float v : values_) {
    if (!std::isfinite(v)) throw InvalidInput("embedding contains a non-finite value");
  }
}

float dot(std::span<const float> a, std::span<const float> b) noexcept {
  float s = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

TokenId token_id(std::string_view surface) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : surface) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h < kFirstWordpieceId ? h + kFirstWordpieceId : h;
}

namespace {

// Decodes one UTF-8 code point starting at text[i]; advances i. Invalid
// sequences decode as the single byte.
char32_t next_code_point(std::string_view text, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(text[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= text.size()) return -1;
    const auto b = static_cast<unsigned char>(text[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0) {
    if (int c1 = cont(1); c1 >= 0) {
      i += 2;
      return (char32_t(b0 & 0x1F) << 6) | char32_t(c1);
    }
  } else if ((b0 & 0xF0) == 0xE0) {
    int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) {
      i += 3;
      return (char32_t(b0 & 0x0F) << 12) | (char32_t(c1) << 6) | char32_t(c2);
    }
  } else if ((b0 & 0xF8) == 0xF0) {
    int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      i += 4;
      return (char32_t(b0 & 0x07) << 18) | (char32_t(c1) << 12) | (char32_t(c2) << 6) |
             char32_t(c3);
    }
  }
  ++i;
  return b0;
}

bool is_space(char32_t c) {
  switch (c) {
    case U' ': case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 0x21 && u <= 0x2F) || (u >= 0x3A && u <= 0x40) || (u >= 0x5B && u <= 0x60) ||
         (u >= 0x7B && u <= 0x7E);
}

std::string normalize_word(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    if (is_ascii_punct(c)) continue;
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    if (end > start) {
      std::string w = normalize_word(text.substr(start, end - start));
      if (!w.empty()) words.push_back(std::move(w));
    }
  };
  while (i < text.size()) {
    const std::size_t at = i;
    if (is_space(next_code_point(text, i))) {
      flush(at);
      start = i;
    }
  }
  flush(text.size());
  return words;
}

std::vector<Token> document_tokens(std::string_view text) {
  std::vector<Token> tokens;
  for (auto& w : tokenize(text)) {
    const std::size_t pos = tokens.size();
    tokens.push_back(Token{token_id(w), std::move(w), TokenKind::kWordpiece, pos});
  }
  return tokens;
}

std::vector<Token> tokenize_and_augment(std::string_view query_text, std::size_t q_len) {
  if (q_len < 2) throw InvalidConfig("q_len must be >= 2 (got " + std::to_string(q_len) + ")");
  auto words = tokenize(query_text);
  if (words.empty()) throw InvalidInput("query has no tokens");
  if (words.size() > q_len - 1) words.resize(q_len - 1);

  std::vector<Token> tokens;
  tokens.reserve(q_len);
  tokens.push_back(Token{kClsId, "[CLS]", TokenKind::kCls, 0});
  for (auto& w : words) {
    const std::size_t pos = tokens.size();
    tokens.push_back(Token{token_id(w), std::move(w), TokenKind::kWordpiece, pos});
  }
  while (tokens.size() < q_len) {
    const std::size_t pos = tokens.size();
    tokens.push_back(Token{kMaskId, "[MASK]", TokenKind::kMask, pos});
  }
  return tokens;
}

ToyEmbedder::ToyEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim == 0) throw InvalidConfig("embedding dim must be >= 1");
}

Embedding ToyEmbedder::embed(TokenId id) const {
  Rng rng(mix64(seed_) ^ mix64(id ^ 0xD1B54A32D192ED03ULL));
  std::vector<double> draw(dim_);
  double norm2 = 0.0;
  for (auto& v : draw) {
    v = rng.gaussian();
    norm2 += v * v;
  }
  // a zero draw has probability 0; fall back to a basis vector
  if (norm2 == 0.0) {
    draw[0] = 1.0;
    norm2 = 1.0;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  std::vector<float> values(dim_);
  for (std::size_t i = 0; i < dim_; ++i) values[i] = static_cast<float>(draw[i] * inv);
  return Embedding(std::move(values));
}

std::vector<Embedding> ToyEmbedder::embed(std::span<const Token> tokens) const {
  std::vector<Embedding> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(embed(t.id));
  return out;
}

std::vector<Embedding> embed_tokens(std::span<const Token> tokens, std::uint64_t seed,
                                    std::size_t dim) {
  return ToyEmbedder(dim, seed).embed(tokens);
}

std::size_t QueryRepresentation::num_wordpieces() const noexcept {
  return static_cast<std::size_t>(std::count_if(tokens.begin(), tokens.end(), [](const Token& t) {
    return t.kind == TokenKind::kWordpiece;
  }));
}

void QueryRepresentation::validate() const {
  if (tokens.empty()) throw InvalidInput("query representation is empty");
  if (tokens.size() != embeddings.size()) {
    throw InvalidInput("query has " + std::to_string(tokens.size()) + " tokens but " +
                       std::to_string(embeddings.size()) + " embeddings");
  }
  if (tokens[0].kind != TokenKind::kCls) throw InvalidInput("query must start with [CLS]");
  bool seen_mask = false;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    switch (tokens[i].kind) {
      case TokenKind::kCls:
        throw InvalidInput("[CLS] may only appear at position 0");
      case TokenKind::kMask:
        seen_mask = true;
        break;
      case TokenKind::kWordpiece:
        if (seen_mask) throw InvalidInput("[MASK] tokens must follow all wordpieces");
        break;
    }
  }
  const std::size_t dim = embeddings[0].dim();
  for (const auto& e : embeddings) {
    if (e.dim() != dim) throw InvalidInput("query embeddings have mixed dimensions");
  }
}

QueryRepresentation represent_query(std::string_view query_text, std::size_t q_len,
                                    const ToyEmbedder& embedder) {
  QueryRepresentation q;
  q.tokens = tokenize_and_augment(query_text, q_len);
  q.embeddings = embedder.embed(q.tokens);
  return q;
}

void DocumentEntry::validate() const {
  if (embeddings.empty()) throw InvalidInput("document '" + doc_id + "' has no embeddings");
  if (!token_ids.empty() && token_ids.size() != embeddings.size()) {
    throw InvalidInput("document '" + doc_id + "' has " + std::to_string(token_ids.size()) +
                       " token ids for " + std::to_string(embeddings.size()) + " embeddings");
  }
  const std::size_t dim = embeddings[0].dim();
  for (const auto& e : embeddings) {
    if (e.dim() != dim) throw InvalidInput("document '" + doc_id + "' has mixed dimensions");
  }
}

std::vector<CorpusDocument> read_corpus(std::istream& in) {
  std::vector<CorpusDocument> docs;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw InvalidInput("corpus line " + std::to_string(line_no) +
                         ": expected doc_id<TAB>text");
    }
    CorpusDocument doc{line.substr(0, tab), line.substr(tab + 1)};
    if (!seen.insert(doc.doc_id).second) {
      throw InvalidInput("corpus line " + std::to_string(line_no) + ": duplicate doc_id '" +
                         doc.doc_id + "'");
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<CorpusDocument> read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open corpus file '" + path + "'");
  return read_corpus(in);
}

DocumentEntry embed_document(const CorpusDocument& doc, const ToyEmbedder& embedder) {
  const auto tokens = document_tokens(doc.text);
  if (tokens.empty()) throw InvalidInput("document '" + doc.doc_id + "' has no tokens");
  DocumentEntry entry;
  entry.doc_id = doc.doc_id;
  entry.embeddings = embedder.embed(tokens);
  entry.token_ids.reserve(tokens.size());
  for (const auto& t : tokens) entry.token_ids.push_back(t.id);
  return entry;
}

Lexicon::Lexicon(std::unordered_map<TokenId, LexiconEntry> entries, std::uint64_t num_docs)
    : entries_(std::move(entries)), num_docs_(num_docs) {
  for (const auto& [id, e] : entries_) {
    if (id < kFirstWordpieceId) throw InvalidInput("lexicon holds a special token id");
    if (e.df > num_docs_ || e.df > e.cf || e.df == 0) {
      throw InvalidInput("lexicon entry violates 1 <= df <= min(cf, num_docs)");
    }
    num_tokens_ += e.cf;
  }
}

std::uint64_t Lexicon::cf(TokenId id) const noexcept {
  auto it = entries_.find(id);
  return it == entries_.end() ? 0 : it->second.cf;
}

std::uint64_t Lexicon::df(TokenId id) const noexcept {
  auto it = entries_.find(id);
  return it == entries_.end() ? 0 : it->second.df;
}

void Lexicon::set_surface(TokenId id, std::string surface) { surfaces_[id] = std::move(surface); }

const std::string* Lexicon::surface(TokenId id) const noexcept {
  auto it = surfaces_.find(id);
  return it == surfaces_.end() ? nullptr : &it->second;
}

bool operator==(const Lexicon& a, const Lexicon& b) noexcept {
  if (a.num_docs_ != b.num_docs_ || a.num_tokens_ != b.num_tokens_ ||
      a.entries_.size() != b.entries_.size()) {
    return false;
  }
  for (const auto& [id, e] : a.entries_) {
    auto it = b.entries_.find(id);
    if (it == b.entries_.end() || it->second.cf != e.cf || it->second.df != e.df) return false;
  }
  return true;
}

namespace {

template <typename IdsOf>
std::unordered_map<TokenId, LexiconEntry> count_tokens(std::size_t num_docs, IdsOf&& ids_of) {
  std::unordered_map<TokenId, LexiconEntry> entries;
  std::unordered_set<TokenId> in_doc;
  for (std::size_t d = 0; d < num_docs; ++d) {
    in_doc.clear();
    for (TokenId id : ids_of(d)) {
      auto& e = entries[id];
      ++e.cf;
      if (in_doc.insert(id).second) ++e.df;
    }
  }
  return entries;
}

}  // namespace

Lexicon build_lexicon(std::span<const DocumentEntry> corpus) {
  if (corpus.empty()) throw InvalidInput("cannot build a lexicon from an empty corpus");
  for (const auto& doc : corpus) {
    if (doc.token_ids.empty()) {
      throw InvalidInput("document '" + doc.doc_id + "' carries no token ids");
    }
  }
  auto entries = count_tokens(corpus.size(), [&](std::size_t d) -> const std::vector<TokenId>& {
    return corpus[d].token_ids;
  });
  return Lexicon(std::move(entries), corpus.size());
}

Lexicon build_lexicon(std::span<const CorpusDocument> corpus) {
  if (corpus.empty()) throw InvalidInput("cannot build a lexicon from an empty corpus");
  std::vector<std::vector<Token>> tokenized;
  tokenized.reserve(corpus.size());
  for (const auto& doc : corpus) tokenized.push_back(document_tokens(doc.text));
  auto entries = count_tokens(corpus.size(), [&](std::size_t d) {
    std::vector<TokenId> ids;
    ids.reserve(tokenized[d].size());
    for (const auto& t : tokenized[d]) ids.push_back(t.id);
    return ids;
  });
  Lexicon lexicon(std::move(entries), corpus.size());
  for (const auto& doc_tokens : tokenized) {
    for (const auto& t : doc_tokens) {
      if (!lexicon.surface(t.id)) lexicon.set_surface(t.id, t.surface);
    }
  }
  return lexicon;
}

void write_lexicon_tsv(const Lexicon& lexicon, std::ostream& out) {
  std::map<std::string, LexiconEntry> sorted;
  for (const auto& [id, e] : lexicon.entries()) {
    const std::string* s = lexicon.surface(id);
    if (!s) throw InvalidInput("lexicon entry " + std::to_string(id) + " has no surface form");
    sorted.emplace(*s, e);
  }
  for (const auto& [surface, e] : sorted) out << surface << '\t' << e.cf << '\t' << e.df << '\n';
}

Lexicon read_lexicon_tsv(std::istream& in, std::uint64_t num_docs) {
  std::unordered_map<TokenId, LexiconEntry> entries;
  std::vector<std::pair<TokenId, std::string>> surfaces;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string surface;
    LexiconEntry e;
    if (!std::getline(fields, surface, '\t') || !(fields >> e.cf >> e.df)) {
      throw InvalidInput("lexicon line " + std::to_string(line_no) + ": expected token<TAB>cf<TAB>df");
    }
    const TokenId id = token_id(surface);
    if (!entries.emplace(id, e).second) {
      throw InvalidInput("lexicon line " + std::to_string(line_no) + ": duplicate token");
    }
    surfaces.emplace_back(id, std::move(surface));
  }
  Lexicon lexicon(std::move(entries), num_docs);
  for (auto& [id, s] : surfaces) lexicon.set_surface(id, std::move(s));
  return lexicon;
}

}  // namespace mve
