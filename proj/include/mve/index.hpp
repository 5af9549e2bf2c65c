#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mve/core.hpp"

namespace mve {

using EmbeddingId = std::uint64_t;
/// Position of a document in the store (corpus order).
using DocNo = std::uint32_t;

/// Row-major view over `rows` contiguous vectors of `dim` floats.
struct MatrixView {
  const float* data = nullptr;
  std::size_t rows = 0;
  std::size_t dim = 0;

  std::span<const float> row(std::size_t i) const noexcept { return {data + i * dim, dim}; }
};

struct DocSpan {
  std::uint64_t start = 0;
  std::uint32_t length = 0;

  friend bool operator==(const DocSpan&, const DocSpan&) = default;
};

/// All document embeddings concatenated in corpus order, with a per-document
/// (start, length) table. Embedding ids are global row numbers.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::size_t dim);
  /// Validates every document and rejects mixed dimensions or duplicate ids.
  static EmbeddingStore from_documents(std::span<const DocumentEntry> docs);

  void add_document(const DocumentEntry& doc);
  /// `vectors` holds length * dim floats.
  void add_document(std::string doc_id, std::span<const float> vectors);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t num_docs() const noexcept { return doc_ids_.size(); }
  std::size_t num_embeddings() const noexcept { return owner_.size(); }

  std::span<const float> embedding(EmbeddingId id) const noexcept {
    return {vectors_.data() + id * dim_, dim_};
  }
  MatrixView all() const noexcept { return {vectors_.data(), num_embeddings(), dim_}; }
  MatrixView document(DocNo doc) const noexcept {
    const DocSpan& s = spans_[doc];
    return {vectors_.data() + s.start * dim_, s.length, dim_};
  }

  DocNo doc_of(EmbeddingId id) const noexcept { return owner_[id]; }
  const std::string& doc_id(DocNo doc) const noexcept { return doc_ids_[doc]; }
  const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
  const std::vector<DocSpan>& spans() const noexcept { return spans_; }
  const std::vector<float>& raw() const noexcept { return vectors_; }

  friend bool operator==(const EmbeddingStore&, const EmbeddingStore&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<float> vectors_;
  std::vector<DocSpan> spans_;
  std::vector<std::string> doc_ids_;
  std::vector<DocNo> owner_;
};

/// Coarse quantizer: n_list unit-norm centroids.
struct Centroids {
  std::size_t dim = 0;
  std::vector<float> vectors;  // n_list * dim

  std::size_t n_list() const noexcept { return dim == 0 ? 0 : vectors.size() / dim; }
  std::span<const float> centroid(std::size_t c) const noexcept {
    return {vectors.data() + c * dim, dim};
  }

  friend bool operator==(const Centroids&, const Centroids&) = default;
};

struct KMeansParams {
  double sample_fraction = 0.05;
  /// 0 selects max(1, floor(sqrt(total embeddings))), capped at the sample size.
  std::size_t n_list = 0;
  std::size_t iterations = 20;
  std::uint64_t seed = 42;
};

std::size_t default_n_list(std::size_t num_embeddings) noexcept;

struct KMeansResult {
  Centroids centroids;
  std::vector<std::size_t> sample;  // store rows used for training
  /// Mean max-dot-product of the sample to its assigned centroid, one value
  /// per iteration (measured after the centroid update).
  std::vector<double> objective;
};

/// Spherical k-means with k-means++ seeding over a sample drawn without
/// replacement. Empty clusters are re-seeded from the sample point least
/// similar to its current centroid.
KMeansResult train_kmeans(const EmbeddingStore& store, const KMeansParams& params);

Centroids train_centroids(const EmbeddingStore& store, double sample_fraction, std::size_t n_list,
                          std::size_t iterations, std::uint64_t seed);

/// argmax over centroids of dot(v, centroid), lowest index on ties.
std::size_t nearest_centroid(const Centroids& centroids, std::span<const float> v) noexcept;

/// One inverted list: parallel embedding ids and full-precision vectors.
struct InvertedList {
  std::vector<EmbeddingId> ids;
  std::vector<float> vectors;  // ids.size() * dim

  std::size_t size() const noexcept { return ids.size(); }

  friend bool operator==(const InvertedList&, const InvertedList&) = default;
};

/// Coarse-only IVF over an EmbeddingStore. Every stored embedding lives in
/// exactly one list, that of its nearest centroid; lists keep store order.
class IvfIndex {
 public:
  IvfIndex() = default;
  IvfIndex(std::shared_ptr<const EmbeddingStore> store, Centroids centroids,
           std::vector<InvertedList> lists);

  std::size_t dim() const noexcept { return centroids_.dim; }
  std::size_t n_list() const noexcept { return centroids_.n_list(); }
  const Centroids& centroids() const noexcept { return centroids_; }
  const std::vector<InvertedList>& lists() const noexcept { return lists_; }
  const EmbeddingStore& store() const noexcept { return *store_; }
  const std::shared_ptr<const EmbeddingStore>& store_ptr() const noexcept { return store_; }

  friend bool operator==(const IvfIndex& a, const IvfIndex& b);

 private:
  std::shared_ptr<const EmbeddingStore> store_;
  Centroids centroids_;
  std::vector<InvertedList> lists_;
};

IvfIndex build_ivf(std::shared_ptr<const EmbeddingStore> store, const Centroids& centroids);

/// Little-endian "MVIX" v1 file. The store is reconstructed from the doc
/// table and the inverted lists on load.
void save_index(const IvfIndex& index, std::ostream& out);
void save_index(const IvfIndex& index, const std::string& path);
/// Throws CorruptIndex naming the failing section; nothing is returned on failure.
IvfIndex load_index(std::istream& in);
IvfIndex load_index(const std::string& path);

/// Little-endian "MVED" v1 dump of externally computed document embeddings.
void write_embedding_dump(std::span<const DocumentEntry> docs, std::ostream& out);
std::vector<DocumentEntry> read_embedding_dump(std::istream& in);
std::vector<DocumentEntry> read_embedding_dump(const std::string& path);

}  // namespace mve
