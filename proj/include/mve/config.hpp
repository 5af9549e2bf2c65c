#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "mve/retrieval.hpp"

namespace mve {

/// Every tunable of the engine. Defaults follow the reference ColBERT
/// setup: 32 query embeddings, k' = 1000, 10 probed partitions, centroids
/// trained on a 5% sample.
struct EngineConfig {
  std::size_t dim = 16;
  std::size_t q_len = kDefaultQueryLength;
  std::size_t k = 1000;
  std::size_t k_prime = 1000;
  /// 0 means max(1, floor(sqrt(total embeddings))), resolved at build time.
  std::size_t n_list = 0;
  std::size_t n_probe = 10;
  double sample_fraction = 0.05;
  std::size_t iterations = 20;
  std::uint64_t seed = 42;
  Strategy strategy = Strategy::kIcf;
  std::size_t p = 3;

  /// Range checks that do not depend on a built index.
  void validate() const;
  PruningConfig pruning() const { return {strategy, p, k_prime, n_probe}; }

  friend bool operator==(const EngineConfig&, const EngineConfig&) = default;
};

/// Pretty-printed JSON with every field.
std::string to_json(const EngineConfig& config);
/// Applies the keys present in `json` on top of `base`. Unknown keys and
/// wrongly typed values are rejected with InvalidConfig.
EngineConfig merge_json(const EngineConfig& base, const std::string& json);

EngineConfig load_config_file(const std::string& path, const EngineConfig& base = {});
void save_config_file(const EngineConfig& config, const std::string& path);

}  // namespace mve
