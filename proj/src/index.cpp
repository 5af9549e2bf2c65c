#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "mve/error.hpp"
#include "mve/index.hpp"
#include "mve/random.hpp"

namespace mve {

EmbeddingStore::EmbeddingStore(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw InvalidConfig("embedding dim must be >= 1");
}

EmbeddingStore EmbeddingStore::from_documents(std::span<const DocumentEntry> docs) {
  if (docs.empty()) throw InvalidInput("cannot build a store from an empty corpus");
  docs.front().validate();
  EmbeddingStore store(docs.front().embeddings.front().dim());
  std::unordered_set<std::string> seen;
  for (const auto& doc : docs) {
    if (!seen.insert(doc.doc_id).second) {
      throw InvalidInput("duplicate doc_id '" + doc.doc_id + "'");
    }
    store.add_document(doc);
  }
  return store;
}

void EmbeddingStore::add_document(const DocumentEntry& doc) {
  doc.validate();
  if (doc.embeddings.front().dim() != dim_) {
    throw InvalidInput("document '" + doc.doc_id + "' has dim " +
                       std::to_string(doc.embeddings.front().dim()) + ", store has dim " +
                       std::to_string(dim_));
  }
  std::vector<float> flat;
  flat.reserve(doc.embeddings.size() * dim_);
  for (const auto& e : doc.embeddings) flat.insert(flat.end(), e.values().begin(), e.values().end());
  add_document(doc.doc_id, flat);
}

void EmbeddingStore::add_document(std::string doc_id, std::span<const float> vectors) {
  if (dim_ == 0) throw InvalidConfig("store has no dimension");
  if (vectors.empty() || vectors.size() % dim_ != 0) {
    throw InvalidInput("document '" + doc_id + "' has " + std::to_string(vectors.size()) +
                       " values, not a positive multiple of dim " + std::to_string(dim_));
  }
  const std::size_t length = vectors.size() / dim_;
  if (length > UINT32_MAX) throw InvalidInput("document '" + doc_id + "' is too long");
  for (float v : vectors) {
    if (!std::isfinite(v)) throw InvalidInput("document '" + doc_id + "' has a non-finite value");
  }
  const auto doc = static_cast<DocNo>(doc_ids_.size());
  spans_.push_back(DocSpan{owner_.size(), static_cast<std::uint32_t>(length)});
  doc_ids_.push_back(std::move(doc_id));
  vectors_.insert(vectors_.end(), vectors.begin(), vectors.end());
  owner_.insert(owner_.end(), length, doc);
}

std::size_t default_n_list(std::size_t num_embeddings) noexcept {
  const auto root = static_cast<std::size_t>(std::sqrt(static_cast<double>(num_embeddings)));
  return std::max<std::size_t>(1, root);
}

std::size_t nearest_centroid(const Centroids& centroids, std::span<const float> v) noexcept {
  std::size_t best = 0;
  float best_score = dot(v, centroids.centroid(0));
  for (std::size_t c = 1; c < centroids.n_list(); ++c) {
    const float s = dot(v, centroids.centroid(c));
    if (s > best_score) {
      best_score = s;
      best = c;
    }
  }
  return best;
}

namespace {

void normalize(std::span<float> v) {
  double n2 = 0.0;
  for (float x : v) n2 += double(x) * x;
  if (n2 <= 0.0) return;
  const double inv = 1.0 / std::sqrt(n2);
  for (float& x : v) x = static_cast<float>(x * inv);
}

std::vector<std::size_t> draw_sample(std::size_t population, std::size_t size, Rng& rng) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t j = i + rng.below(population - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(size);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// k-means++ seeding with 1 - dot as the (squared-distance proportional) weight.
std::vector<float> seed_centroids(const std::vector<float>& points, std::size_t n,
                                  std::size_t dim, std::size_t k, Rng& rng) {
  auto row = [&](std::size_t i) { return std::span<const float>(points.data() + i * dim, dim); };
  std::vector<float> centers;
  centers.reserve(k * dim);
  std::vector<bool> chosen(n, false);
  std::vector<double> best(n, -2.0);

  auto take = [&](std::size_t i) {
    chosen[i] = true;
    centers.insert(centers.end(), row(i).begin(), row(i).end());
    for (std::size_t p = 0; p < n; ++p) best[p] = std::max(best[p], double(dot(row(p), row(i))));
  };

  take(rng.below(n));
  while (centers.size() < k * dim) {
    double total = 0.0;
    for (std::size_t p = 0; p < n; ++p) total += std::max(0.0, 1.0 - best[p]);
    std::size_t pick = n;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (std::size_t p = 0; p < n; ++p) {
        const double w = std::max(0.0, 1.0 - best[p]);
        if (w <= 0.0) continue;
        pick = p;
        if (r < w) break;
        r -= w;
      }
    }
    if (pick == n) {
      // every point coincides with a chosen center; fall back to the first unused point
      pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
    }
    take(pick);
  }
  return centers;
}

}  // namespace

KMeansResult train_kmeans(const EmbeddingStore& store, const KMeansParams& params) {
  if (!(params.sample_fraction > 0.0 && params.sample_fraction <= 1.0)) {
    throw InvalidConfig("sample_fraction must lie in (0, 1]");
  }
  if (params.iterations == 0) throw InvalidConfig("iterations must be >= 1");
  const std::size_t total = store.num_embeddings();
  if (total == 0) throw InvalidInput("cannot train centroids on an empty store");
  const std::size_t dim = store.dim();
  const auto sample_size = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(params.sample_fraction * static_cast<double>(total))), 1,
      total);
  const std::size_t n_list =
      params.n_list == 0 ? std::min(default_n_list(total), sample_size) : params.n_list;
  if (n_list > sample_size) {
    throw InvalidConfig("n_list (" + std::to_string(n_list) + ") exceeds the training sample size (" +
                        std::to_string(sample_size) + ")");
  }

  Rng rng(params.seed);
  KMeansResult result;
  result.sample = draw_sample(total, sample_size, rng);

  const std::size_t n = sample_size;
  std::vector<float> points(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    auto src = store.embedding(result.sample[i]);
    std::span<float> dst(points.data() + i * dim, dim);
    std::copy(src.begin(), src.end(), dst.begin());
    normalize(dst);
  }
  auto row = [&](std::size_t i) { return std::span<const float>(points.data() + i * dim, dim); };

  Centroids& centroids = result.centroids;
  centroids.dim = dim;
  centroids.vectors = seed_centroids(points, n, dim, n_list, rng);

  std::vector<std::size_t> assign(n);
  std::vector<float> sim(n);
  std::vector<double> sums(n_list * dim);
  std::vector<std::size_t> counts(n_list);
  auto assign_all = [&] {
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      assign[i] = nearest_centroid(centroids, row(i));
      sim[i] = dot(row(i), centroids.centroid(assign[i]));
      objective += sim[i];
    }
    return objective / static_cast<double>(n);
  };

  assign_all();
  for (std::size_t it = 0; it < params.iterations; ++it) {
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) ++counts[assign[i]];

    // empty clusters take the worst-served point
    std::vector<bool> moved(n, false);
    for (std::size_t c = 0; c < n_list; ++c) {
      if (counts[c] != 0) continue;
      std::size_t worst = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (moved[i] || counts[assign[i]] <= 1) continue;
        if (worst == n || sim[i] < sim[worst]) worst = i;
      }
      if (worst == n) continue;
      moved[worst] = true;
      --counts[assign[worst]];
      assign[worst] = c;
      counts[c] = 1;
    }

    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = row(i);
      double* s = sums.data() + assign[i] * dim;
      for (std::size_t d = 0; d < dim; ++d) s[d] += x[d];
    }
    for (std::size_t c = 0; c < n_list; ++c) {
      if (counts[c] == 0) continue;
      const double* s = sums.data() + c * dim;
      double n2 = 0.0;
      for (std::size_t d = 0; d < dim; ++d) n2 += s[d] * s[d];
      if (n2 <= 0.0) continue;
      const double inv = 1.0 / std::sqrt(n2);
      float* out = centroids.vectors.data() + c * dim;
      for (std::size_t d = 0; d < dim; ++d) out[d] = static_cast<float>(s[d] * inv);
    }
    result.objective.push_back(assign_all());
  }
  return result;
}

Centroids train_centroids(const EmbeddingStore& store, double sample_fraction, std::size_t n_list,
                          std::size_t iterations, std::uint64_t seed) {
  if (n_list == 0) throw InvalidConfig("n_list must be >= 1");
  return train_kmeans(store, KMeansParams{sample_fraction, n_list, iterations, seed}).centroids;
}

IvfIndex::IvfIndex(std::shared_ptr<const EmbeddingStore> store, Centroids centroids,
                   std::vector<InvertedList> lists)
    : store_(std::move(store)), centroids_(std::move(centroids)), lists_(std::move(lists)) {
  if (!store_) throw InvalidInput("index needs a store");
  if (centroids_.n_list() == 0) throw InvalidConfig("index needs at least one centroid");
  if (centroids_.dim != store_->dim()) throw InvalidInput("centroid and store dims differ");
  if (lists_.size() != centroids_.n_list()) throw InvalidInput("one inverted list per centroid required");
  std::size_t total = 0;
  for (const auto& l : lists_) {
    if (l.vectors.size() != l.ids.size() * dim()) throw InvalidInput("inverted list size mismatch");
    total += l.size();
  }
  if (total != store_->num_embeddings()) {
    throw InvalidInput("inverted lists hold " + std::to_string(total) + " embeddings, store holds " +
                       std::to_string(store_->num_embeddings()));
  }
}

bool operator==(const IvfIndex& a, const IvfIndex& b) {
  if (!a.store_ || !b.store_) return a.store_ == b.store_;
  return *a.store_ == *b.store_ && a.centroids_ == b.centroids_ && a.lists_ == b.lists_;
}

IvfIndex build_ivf(std::shared_ptr<const EmbeddingStore> store, const Centroids& centroids) {
  if (!store) throw InvalidInput("index needs a store");
  if (centroids.n_list() == 0) throw InvalidConfig("index needs at least one centroid");
  if (centroids.dim != store->dim()) {
    throw InvalidInput("centroid dim " + std::to_string(centroids.dim) + " != store dim " +
                       std::to_string(store->dim()));
  }
  std::vector<InvertedList> lists(centroids.n_list());
  for (EmbeddingId id = 0; id < store->num_embeddings(); ++id) {
    const auto v = store->embedding(id);
    auto& list = lists[nearest_centroid(centroids, v)];
    list.ids.push_back(id);
    list.vectors.insert(list.vectors.end(), v.begin(), v.end());
  }
  return IvfIndex(std::move(store), centroids, std::move(lists));
}

}  // namespace mve
