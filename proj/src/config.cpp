#include "mve/config.hpp"

#include <fstream>
#include <iterator>
#include <json.hpp>

#include "mve/error.hpp"

namespace mve {

void EngineConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw InvalidConfig(what);
  };
  require(dim >= 1, "dim must be >= 1");
  require(q_len >= 2, "q_len must be >= 2");
  require(k >= 1, "k must be >= 1");
  require(k_prime >= 1, "k_prime must be >= 1");
  require(n_probe >= 1, "n_probe must be >= 1");
  require(sample_fraction > 0.0 && sample_fraction <= 1.0, "sample_fraction must lie in (0, 1]");
  require(iterations >= 1, "iterations must be >= 1");
  require(p >= 1 && p <= q_len, "p must satisfy 1 <= p <= q_len (got p=" + std::to_string(p) +
                                    ", q_len=" + std::to_string(q_len) + ")");
}

std::string to_json(const EngineConfig& c) {
  nlohmann::ordered_json j;
  j["dim"] = c.dim;
  j["q_len"] = c.q_len;
  j["k"] = c.k;
  j["k_prime"] = c.k_prime;
  j["n_list"] = c.n_list;
  j["n_probe"] = c.n_probe;
  j["sample_fraction"] = c.sample_fraction;
  j["iterations"] = c.iterations;
  j["seed"] = c.seed;
  j["strategy"] = std::string(to_string(c.strategy));
  j["p"] = c.p;
  return j.dump(2);
}

EngineConfig merge_json(const EngineConfig& base, const std::string& json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidConfig(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidConfig("config must be a JSON object");

  EngineConfig c = base;
  auto count = [&](const std::string& key, const nlohmann::json& v, auto& field) {
    if (!v.is_number_unsigned()) throw InvalidConfig("config key '" + key + "' must be a non-negative integer");
    field = v.get<std::remove_reference_t<decltype(field)>>();
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "dim") count(key, v, c.dim);
    else if (key == "q_len") count(key, v, c.q_len);
    else if (key == "k") count(key, v, c.k);
    else if (key == "k_prime") count(key, v, c.k_prime);
    else if (key == "n_list") count(key, v, c.n_list);
    else if (key == "n_probe") count(key, v, c.n_probe);
    else if (key == "iterations") count(key, v, c.iterations);
    else if (key == "seed") count(key, v, c.seed);
    else if (key == "p") count(key, v, c.p);
    else if (key == "sample_fraction") {
      if (!v.is_number()) throw InvalidConfig("config key 'sample_fraction' must be a number");
      c.sample_fraction = v.get<double>();
    } else if (key == "strategy") {
      const auto s = v.is_string() ? parse_strategy(v.get<std::string>()) : std::nullopt;
      if (!s) throw InvalidConfig("config key 'strategy' must be one of FIRST, ICF, IDF");
      c.strategy = *s;
    } else {
      throw InvalidConfig("unknown config key '" + key + "'");
    }
  }
  return c;
}

EngineConfig load_config_file(const std::string& path, const EngineConfig& base) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open config file '" + path + "'");
  return merge_json(base, std::string(std::istreambuf_iterator<char>(in), {}));
}

void save_config_file(const EngineConfig& config, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InvalidInput("cannot write config file '" + path + "'");
  out << to_json(config) << '\n';
}

}  // namespace mve
