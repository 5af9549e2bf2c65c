#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mve {

using TokenId = std::uint64_t;

inline constexpr TokenId kClsId = 0;
inline constexpr TokenId kMaskId = 1;
inline constexpr TokenId kFirstWordpieceId = 2;

inline constexpr std::size_t kDefaultQueryLength = 32;

/// Fixed-dimension real vector. Holds both query-side and document-side
/// token embeddings.
class Embedding {
 public:
  Embedding() = default;
  /// Throws InvalidInput on an empty vector or non-finite values.
  explicit Embedding(std::vector<float> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const float> values() const noexcept { return values_; }
  const float* data() const noexcept { return values_.data(); }
  float operator[](std::size_t i) const noexcept { return values_[i]; }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  std::vector<float> values_;
};

float dot(std::span<const float> a, std::span<const float> b) noexcept;

enum class TokenKind : std::uint8_t { kWordpiece, kCls, kMask };

struct Token {
  TokenId id = 0;
  std::string surface;
  TokenKind kind = TokenKind::kWordpiece;
  std::size_t position = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

/// Vocabulary id of a wordpiece surface form. Ids are a 64-bit FNV-1a hash
/// of the surface, lifted past the reserved CLS/MASK ids, so the same
/// surface maps to the same id in every corpus, query and lexicon file.
TokenId token_id(std::string_view surface) noexcept;

/// Lowercases, splits on whitespace (ASCII and the Unicode space
/// separators), strips ASCII punctuation. Tokens that end up empty are dropped.
std::vector<std::string> tokenize(std::string_view text);

/// Wordpiece tokens for a document; positions are 0-based within the document.
std::vector<Token> document_tokens(std::string_view text);

/// Query tokens: [CLS] + wordpieces + [MASK] padding to exactly q_len.
/// Wordpieces beyond q_len - 1 are truncated.
std::vector<Token> tokenize_and_augment(std::string_view query_text, std::size_t q_len);

/// Deterministic stand-in for the query and document encoders. Each token id
/// maps to an L2-normalized Gaussian vector drawn from a stream keyed on
/// (seed, id); the mapping is context-independent.
class ToyEmbedder {
 public:
  ToyEmbedder(std::size_t dim, std::uint64_t seed);

  std::size_t dim() const noexcept { return dim_; }
  std::uint64_t seed() const noexcept { return seed_; }

  Embedding embed(TokenId id) const;
  std::vector<Embedding> embed(std::span<const Token> tokens) const;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

std::vector<Embedding> embed_tokens(std::span<const Token> tokens, std::uint64_t seed,
                                    std::size_t dim);

struct QueryRepresentation {
  std::vector<Token> tokens;
  std::vector<Embedding> embeddings;

  std::size_t size() const noexcept { return tokens.size(); }
  std::size_t num_wordpieces() const noexcept;

  /// Checks the CLS/MASK layout and the tokens/embeddings pairing.
  void validate() const;
};

QueryRepresentation represent_query(std::string_view query_text, std::size_t q_len,
                                    const ToyEmbedder& embedder);

struct DocumentEntry {
  std::string doc_id;
  std::vector<Embedding> embeddings;
  /// Parallel to `embeddings`. Empty for documents ingested from an external
  /// embedding dump, where token identity is unknown.
  std::vector<TokenId> token_ids;

  void validate() const;
};

/// Tokenized document text as read from a corpus file.
struct CorpusDocument {
  std::string doc_id;
  std::string text;
};

/// Reads `doc_id<TAB>text` lines. Blank lines are skipped.
std::vector<CorpusDocument> read_corpus(std::istream& in);
std::vector<CorpusDocument> read_corpus_file(const std::string& path);

DocumentEntry embed_document(const CorpusDocument& doc, const ToyEmbedder& embedder);

struct LexiconEntry {
  std::uint64_t cf = 0;
  std::uint64_t df = 0;
};

/// Collection statistics keyed by token id. Special tokens never have entries.
class Lexicon {
 public:
  Lexicon() = default;
  Lexicon(std::unordered_map<TokenId, LexiconEntry> entries, std::uint64_t num_docs);

  /// Collection frequency; 0 for tokens absent from the collection.
  std::uint64_t cf(TokenId id) const noexcept;
  std::uint64_t df(TokenId id) const noexcept;
  bool contains(TokenId id) const noexcept { return entries_.contains(id); }

  std::uint64_t num_docs() const noexcept { return num_docs_; }
  std::uint64_t num_tokens() const noexcept { return num_tokens_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::unordered_map<TokenId, LexiconEntry>& entries() const noexcept { return entries_; }

  /// Surface forms are optional; they are only needed for TSV export.
  void set_surface(TokenId id, std::string surface);
  const std::string* surface(TokenId id) const noexcept;

  friend bool operator==(const Lexicon& a, const Lexicon& b) noexcept;

 private:
  std::unordered_map<TokenId, LexiconEntry> entries_;
  std::unordered_map<TokenId, std::string> surfaces_;
  std::uint64_t num_docs_ = 0;
  std::uint64_t num_tokens_ = 0;
};

Lexicon build_lexicon(std::span<const DocumentEntry> corpus);
/// Same counts as above, computed from raw text; also records surfaces.
Lexicon build_lexicon(std::span<const CorpusDocument> corpus);

/// `token<TAB>cf<TAB>df`, one line per entry, sorted by token surface.
void write_lexicon_tsv(const Lexicon& lexicon, std::ostream& out);
/// num_docs is not part of the TSV and must be supplied (it is stored in the index).
Lexicon read_lexicon_tsv(std::istream& in, std::uint64_t num_docs);

}  // namespace mve
