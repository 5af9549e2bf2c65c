#include "mve/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "mve/error.hpp"

namespace mve {

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::kFirst: return "FIRST";
    case Strategy::kIcf: return "ICF";
    case Strategy::kIdf: return "IDF";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(std::string_view name) noexcept {
  std::string lower(name);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "first") return Strategy::kFirst;
  if (lower == "icf") return Strategy::kIcf;
  if (lower == "idf") return Strategy::kIdf;
  return std::nullopt;
}

void PruningConfig::validate(std::size_t q_len, std::size_t n_list) const {
  if (p < 1 || p > q_len) {
    throw InvalidConfig("p must satisfy 1 <= p <= q_len (got p=" + std::to_string(p) +
                        ", q_len=" + std::to_string(q_len) + ")");
  }
  if (k_prime < 1) throw InvalidConfig("k_prime must be >= 1");
  if (n_probe < 1 || n_probe > n_list) {
    throw InvalidConfig("n_probe must satisfy 1 <= n_probe <= n_list (got n_probe=" +
                        std::to_string(n_probe) + ", n_list=" + std::to_string(n_list) + ")");
  }
}

std::vector<std::size_t> order_embeddings(const QueryRepresentation& query, const Lexicon& lexicon,
                                          Strategy strategy) {
  std::vector<std::size_t> order(query.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (strategy == Strategy::kFirst) return order;

  // wordpieces first by importance, then CLS, then MASK; stable within a class
  auto klass = [&](std::size_t pos) {
    switch (query.tokens[pos].kind) {
      case TokenKind::kWordpiece: return 0;
      case TokenKind::kCls: return 1;
      case TokenKind::kMask: return 2;
    }
    return 3;
  };
  std::vector<double> importance(query.size(), 0.0);
  const double n_docs = static_cast<double>(lexicon.num_docs());
  for (std::size_t pos = 0; pos < query.size(); ++pos) {
    if (query.tokens[pos].kind != TokenKind::kWordpiece) continue;
    const TokenId id = query.tokens[pos].id;
    importance[pos] = strategy == Strategy::kIcf
                          ? -static_cast<double>(lexicon.cf(id))
                          : std::log((n_docs + 1.0) / (static_cast<double>(lexicon.df(id)) + 1.0));
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const int ka = klass(a), kb = klass(b);
    if (ka != kb) return ka < kb;
    return importance[a] > importance[b];
  });
  return order;
}

AnnResult ann_candidates(const IvfIndex& index, std::span<const float> phi, std::size_t k_prime,
                         std::size_t n_probe) {
  if (phi.size() != index.dim()) {
    throw InvalidInput("query embedding dim " + std::to_string(phi.size()) + " != index dim " +
                       std::to_string(index.dim()));
  }
  if (k_prime < 1) throw InvalidConfig("k_prime must be >= 1");
  if (n_probe < 1 || n_probe > index.n_list()) {
    throw InvalidConfig("n_probe must satisfy 1 <= n_probe <= n_list (got n_probe=" +
                        std::to_string(n_probe) + ", n_list=" + std::to_string(index.n_list()) + ")");
  }

  const Centroids& centroids = index.centroids();
  std::vector<std::pair<float, std::size_t>> probes(centroids.n_list());
  for (std::size_t c = 0; c < probes.size(); ++c) probes[c] = {dot(phi, centroids.centroid(c)), c};
  auto by_score = [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  };
  std::partial_sort(probes.begin(), probes.begin() + static_cast<std::ptrdiff_t>(n_probe),
                    probes.end(), by_score);

  std::vector<EmbeddingHit> scanned;
  const std::size_t dim = index.dim();
  for (std::size_t i = 0; i < n_probe; ++i) {
    const InvertedList& list = index.lists()[probes[i].second];
    for (std::size_t j = 0; j < list.size(); ++j) {
      scanned.push_back({list.ids[j], dot(phi, {list.vectors.data() + j * dim, dim})});
    }
  }
  auto better = [](const EmbeddingHit& a, const EmbeddingHit& b) {
    return a.score > b.score || (a.score == b.score && a.id < b.id);
  };
  const std::size_t keep = std::min(k_prime, scanned.size());
  std::partial_sort(scanned.begin(), scanned.begin() + static_cast<std::ptrdiff_t>(keep),
                    scanned.end(), better);
  scanned.resize(keep);

  AnnResult result;
  result.hits = std::move(scanned);
  result.docs.reserve(result.hits.size());
  for (const auto& h : result.hits) result.docs.push_back(index.store().doc_of(h.id));
  std::sort(result.docs.begin(), result.docs.end());
  result.docs.erase(std::unique(result.docs.begin(), result.docs.end()), result.docs.end());
  return result;
}

void CandidateSet::add(DocNo doc, std::size_t position) {
  auto& positions = provenance_[doc];
  auto it = std::lower_bound(positions.begin(), positions.end(), position);
  if (it == positions.end() || *it != position) positions.insert(it, position);
}

std::vector<DocNo> CandidateSet::docs() const {
  std::vector<DocNo> out;
  out.reserve(provenance_.size());
  for (const auto& [doc, _] : provenance_) out.push_back(doc);
  return out;
}

std::vector<std::size_t> CandidateSet::provenance(DocNo doc) const {
  auto it = provenance_.find(doc);
  return it == provenance_.end() ? std::vector<std::size_t>{} : it->second;
}

CandidateSet pruned_union(std::span<const EmbeddingCandidates> per_embedding, std::size_t p) {
  if (p == 0) throw InvalidConfig("p must be >= 1");
  if (p > per_embedding.size()) {
    throw InvalidConfig("p (" + std::to_string(p) + ") exceeds the " +
                        std::to_string(per_embedding.size()) + " available embeddings");
  }
  CandidateSet set;
  for (std::size_t i = 0; i < p; ++i) {
    for (DocNo doc : per_embedding[i].docs) set.add(doc, per_embedding[i].position);
  }
  return set;
}

namespace {

template <typename RowOf>
float maxsim(std::span<const Embedding> query, std::size_t doc_rows, std::size_t doc_dim,
             RowOf&& doc_row) {
  if (doc_rows == 0) throw InvalidInput("cannot score an empty document");
  float total = 0.0f;
  for (const auto& phi : query) {
    if (phi.dim() != doc_dim) {
      throw InvalidInput("query dim " + std::to_string(phi.dim()) + " != document dim " +
                         std::to_string(doc_dim));
    }
    float best = -std::numeric_limits<float>::infinity();
    for (std::size_t j = 0; j < doc_rows; ++j) best = std::max(best, dot(phi.values(), doc_row(j)));
    total += best;
  }
  return total;
}

}  // namespace

float exact_score(std::span<const Embedding> query, MatrixView doc) {
  return maxsim(query, doc.rows, doc.dim, [&](std::size_t j) { return doc.row(j); });
}

float exact_score(const QueryRepresentation& query, MatrixView doc) {
  return exact_score(query.embeddings, doc);
}

float exact_score(const QueryRepresentation& query, const DocumentEntry& doc) {
  const std::size_t dim = doc.embeddings.empty() ? 0 : doc.embeddings.front().dim();
  return maxsim(query.embeddings, doc.embeddings.size(), dim,
                [&](std::size_t j) { return doc.embeddings[j].values(); });
}

Ranking make_ranking(std::vector<std::pair<DocNo, float>> scored, const EmbeddingStore& store,
                     std::size_t k) {
  auto better = [&](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return store.doc_id(a.first) < store.doc_id(b.first);
  };
  const std::size_t keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                    scored.end(), better);
  Ranking ranking;
  ranking.depth = k;
  ranking.entries.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    ranking.entries.push_back({scored[i].first, store.doc_id(scored[i].first), scored[i].second});
  }
  return ranking;
}

Ranking rerank(const CandidateSet& candidates, const QueryRepresentation& query,
               const EmbeddingStore& store, std::size_t k) {
  std::vector<std::pair<DocNo, float>> scored;
  scored.reserve(candidates.size());
  for (const auto& [doc, _] : candidates.entries()) {
    if (doc >= store.num_docs()) {
      throw InternalConsistency("candidate document " + std::to_string(doc) +
                                " is not in the store");
    }
    scored.emplace_back(doc, exact_score(query, store.document(doc)));
  }
  return make_ranking(std::move(scored), store, k);
}

std::vector<EmbeddingCandidates> per_embedding_candidates(const IvfIndex& index,
                                                          const QueryRepresentation& query,
                                                          std::size_t k_prime,
                                                          std::size_t n_probe) {
  std::vector<EmbeddingCandidates> out(query.size());
  for (std::size_t pos = 0; pos < query.size(); ++pos) {
    out[pos].position = pos;
    out[pos].docs = ann_candidates(index, query.embeddings[pos].values(), k_prime, n_probe).docs;
  }
  return out;
}

Searcher::Searcher(const IvfIndex& index, const Lexicon& lexicon, ToyEmbedder embedder,
                   std::size_t q_len)
    : index_(index), lexicon_(lexicon), embedder_(std::move(embedder)), q_len_(q_len) {
  if (q_len_ < 2) throw InvalidConfig("q_len must be >= 2");
  if (embedder_.dim() != index_.dim()) {
    throw InvalidConfig("embedder dim " + std::to_string(embedder_.dim()) + " != index dim " +
                        std::to_string(index_.dim()));
  }
}

QueryRepresentation Searcher::represent(std::string_view query_text) const {
  return represent_query(query_text, q_len_, embedder_);
}

SearchResult Searcher::search(std::string_view query_text, const PruningConfig& config,
                              std::size_t k) const {
  config.validate(q_len_, index_.n_list());
  return search(represent(query_text), config, k);
}

SearchResult Searcher::search(const QueryRepresentation& query, const PruningConfig& config,
                              std::size_t k) const {
  query.validate();
  config.validate(query.size(), index_.n_list());
  const auto order = order_embeddings(query, lexicon_, config.strategy);

  std::vector<EmbeddingCandidates> per_embedding(config.p);
  for (std::size_t i = 0; i < config.p; ++i) {
    const std::size_t pos = order[i];
    per_embedding[i].position = pos;
    per_embedding[i].docs =
        ann_candidates(index_, query.embeddings[pos].values(), config.k_prime, config.n_probe).docs;
  }
  SearchResult result;
  result.candidates = pruned_union(per_embedding, config.p);
  // pruning only affects candidate generation; scoring uses every query embedding
  result.ranking = rerank(result.candidates, query, index_.store(), k);
  return result;
}

}  // namespace mve
