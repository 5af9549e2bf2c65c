#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mve/core.hpp"
#include "mve/index.hpp"

namespace mve {

/// How query embeddings are ordered before the first p are kept.
enum class Strategy { kFirst, kIcf, kIdf };

std::string_view to_string(Strategy s) noexcept;
/// Accepts "first", "icf", "idf" in any case.
std::optional<Strategy> parse_strategy(std::string_view name) noexcept;

struct PruningConfig {
  Strategy strategy = Strategy::kIcf;
  std::size_t p = 3;
  std::size_t k_prime = 1000;
  std::size_t n_probe = 10;

  /// Enforces 1 <= p <= q_len, k_prime >= 1, 1 <= n_probe <= n_list.
  void validate(std::size_t q_len, std::size_t n_list) const;
};

/// Permutation of query positions, most important first.
///
/// FIRST keeps occurrence order. ICF puts wordpieces by ascending collection
/// frequency (unseen tokens count as 0), then CLS, then the MASK tokens in
/// occurrence order. IDF is the same with wordpieces by descending
/// log((N + 1) / (df + 1)). Ties keep occurrence order.
std::vector<std::size_t> order_embeddings(const QueryRepresentation& query, const Lexicon& lexicon,
                                          Strategy strategy);

struct EmbeddingHit {
  EmbeddingId id = 0;
  float score = 0.0f;

  friend bool operator==(const EmbeddingHit&, const EmbeddingHit&) = default;
};

struct AnnResult {
  /// Top-k' embeddings by dot product, best first, ties by ascending id.
  std::vector<EmbeddingHit> hits;
  /// Owning documents of `hits`, ascending and deduplicated.
  std::vector<DocNo> docs;
};

/// Probes the n_probe centroids most similar to `phi` and scans their lists
/// exactly. Returns fewer than k' hits when the probed lists are smaller.
AnnResult ann_candidates(const IvfIndex& index, std::span<const float> phi, std::size_t k_prime,
                         std::size_t n_probe);

/// Documents retrieved by one query embedding.
struct EmbeddingCandidates {
  std::size_t position = 0;
  std::vector<DocNo> docs;
};

/// Union of per-embedding document sets with the query positions that
/// contributed each document.
class CandidateSet {
 public:
  void add(DocNo doc, std::size_t position);

  std::size_t size() const noexcept { return provenance_.size(); }
  bool empty() const noexcept { return provenance_.empty(); }
  bool contains(DocNo doc) const noexcept { return provenance_.contains(doc); }
  /// Ascending document numbers.
  std::vector<DocNo> docs() const;
  /// Positions that retrieved `doc`, ascending; empty if absent.
  std::vector<std::size_t> provenance(DocNo doc) const;
  const std::map<DocNo, std::vector<std::size_t>>& entries() const noexcept { return provenance_; }

  friend bool operator==(const CandidateSet&, const CandidateSet&) = default;

 private:
  std::map<DocNo, std::vector<std::size_t>> provenance_;
};

/// Union of the first p entries of `per_embedding` (already in strategy order).
CandidateSet pruned_union(std::span<const EmbeddingCandidates> per_embedding, std::size_t p);

/// Sum over query rows of the max dot product against any document row.
float exact_score(std::span<const Embedding> query, MatrixView doc);
float exact_score(const QueryRepresentation& query, MatrixView doc);
float exact_score(const QueryRepresentation& query, const DocumentEntry& doc);

struct RankedDoc {
  DocNo doc = 0;
  std::string doc_id;
  float score = 0.0f;

  friend bool operator==(const RankedDoc&, const RankedDoc&) = default;
};

struct Ranking {
  std::vector<RankedDoc> entries;
  std::size_t depth = 0;

  std::size_t size() const noexcept { return entries.size(); }
  friend bool operator==(const Ranking&, const Ranking&) = default;
};

/// Sorts by descending score, ties by ascending doc_id, truncated to k.
Ranking make_ranking(std::vector<std::pair<DocNo, float>> scored, const EmbeddingStore& store,
                     std::size_t k);

/// Scores every candidate with the full query representation.
Ranking rerank(const CandidateSet& candidates, const QueryRepresentation& query,
               const EmbeddingStore& store, std::size_t k);

struct SearchResult {
  Ranking ranking;
  CandidateSet candidates;
};

/// First-stage candidates for each query position, in position order.
std::vector<EmbeddingCandidates> per_embedding_candidates(const IvfIndex& index,
                                                          const QueryRepresentation& query,
                                                          std::size_t k_prime,
                                                          std::size_t n_probe);

/// End-to-end pipeline over an immutable index, lexicon and embedder.
class Searcher {
 public:
  Searcher(const IvfIndex& index, const Lexicon& lexicon, ToyEmbedder embedder,
           std::size_t q_len = kDefaultQueryLength);

  QueryRepresentation represent(std::string_view query_text) const;

  SearchResult search(std::string_view query_text, const PruningConfig& config,
                      std::size_t k) const;
  SearchResult search(const QueryRepresentation& query, const PruningConfig& config,
                      std::size_t k) const;

  const IvfIndex& index() const noexcept { return index_; }
  const Lexicon& lexicon() const noexcept { return lexicon_; }
  std::size_t q_len() const noexcept { return q_len_; }

 private:
  const IvfIndex& index_;
  const Lexicon& lexicon_;
  ToyEmbedder embedder_;
  std::size_t q_len_;
};

}  // namespace mve
