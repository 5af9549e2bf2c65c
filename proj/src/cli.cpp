#include "mve/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "mve/config.hpp"
#include "mve/error.hpp"
#include "mve/eval.hpp"
#include "mve/index.hpp"
#include "mve/retrieval.hpp"

namespace mve::cli {
namespace {

namespace fs = std::filesystem;

constexpr const char* kIndexFile = "index.mvix";
constexpr const char* kLexiconFile = "lexicon.tsv";
constexpr const char* kConfigFile = "config.json";

/// Config values given on the command line; unset ones fall through to the
/// config file, then to the index's stored config, then to defaults.
struct ConfigFlags {
  std::optional<std::string> config_file;
  std::optional<std::size_t> dim, q_len, k, k_prime, n_list, n_probe, iterations, p;
  std::optional<double> sample_fraction;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> strategy;

  void attach(CLI::App& app) {
    app.add_option("--config", config_file, "JSON config file");
    app.add_option("--dim", dim, "embedding dimension");
    app.add_option("--q-len", q_len, "augmented query length");
    app.add_option("--k", k, "final ranking depth");
    app.add_option("--k-prime", k_prime, "embeddings retrieved per query embedding");
    app.add_option("--n-list", n_list, "number of IVF partitions (0 = sqrt of #embeddings)");
    app.add_option("--n-probe", n_probe, "partitions probed per query embedding");
    app.add_option("--sample-fraction", sample_fraction, "fraction of embeddings used for k-means");
    app.add_option("--iterations", iterations, "k-means iterations");
    app.add_option("--seed", seed, "random seed (also MVE_SEED)");
    app.add_option("--strategy", strategy, "embedding order: first, icf, idf");
    app.add_option("--p", p, "number of query embeddings used for candidate generation");
  }

  EngineConfig resolve(const std::optional<fs::path>& index_dir) const {
    EngineConfig c;
    if (index_dir && fs::exists(*index_dir / kConfigFile)) {
      c = load_config_file((*index_dir / kConfigFile).string(), c);
    }
    if (config_file) c = load_config_file(*config_file, c);
    if (const char* env = std::getenv("MVE_SEED"); env && *env) {
      try {
        std::size_t used = 0;
        c.seed = std::stoull(env, &used);
        if (env[used] != '\0') throw std::invalid_argument(env);
      } catch (const std::exception&) {
        throw InvalidConfig(std::string("MVE_SEED is not an unsigned integer: '") + env + "'");
      }
    }
    if (dim) c.dim = *dim;
    if (q_len) c.q_len = *q_len;
    if (k) c.k = *k;
    if (k_prime) c.k_prime = *k_prime;
    if (n_list) c.n_list = *n_list;
    if (n_probe) c.n_probe = *n_probe;
    if (iterations) c.iterations = *iterations;
    if (sample_fraction) c.sample_fraction = *sample_fraction;
    if (seed) c.seed = *seed;
    if (p) c.p = *p;
    if (strategy) {
      const auto s = parse_strategy(*strategy);
      if (!s) throw InvalidConfig("strategy must be one of first, icf, idf (got '" + *strategy + "')");
      c.strategy = *s;
    }
    c.validate();
    return c;
  }
};

void echo_config(const EngineConfig& c, std::ostream& err) {
  std::string json = to_json(c);
  std::replace(json.begin(), json.end(), '\n', ' ');
  err << "effective config: " << json << '\n';
}

fs::path require_index_dir(const std::string& dir) {
  fs::path path(dir);
  if (!fs::is_directory(path)) throw InvalidInput("index directory '" + dir + "' does not exist");
  return path;
}

/// Loaded index directory plus the config it was built with.
struct LoadedIndex {
  EngineConfig config;
  IvfIndex index;
  Lexicon lexicon;
};

LoadedIndex open_index(const fs::path& dir, const ConfigFlags& flags, std::ostream& err) {
  LoadedIndex loaded;
  loaded.config = flags.resolve(dir);
  loaded.index = load_index((dir / kIndexFile).string());
  if (flags.dim && *flags.dim != loaded.index.dim()) {
    throw InvalidConfig("--dim " + std::to_string(*flags.dim) + " does not match the index dim " +
                        std::to_string(loaded.index.dim()));
  }
  loaded.config.dim = loaded.index.dim();
  loaded.config.n_list = loaded.index.n_list();
  if (loaded.config.n_probe > loaded.config.n_list) {
    err << "note: n_probe " << loaded.config.n_probe << " exceeds n_list " << loaded.config.n_list
        << "; probing all " << loaded.config.n_list << " partitions\n";
    loaded.config.n_probe = loaded.config.n_list;
  }
  std::ifstream lex((dir / kLexiconFile).string());
  if (!lex) throw InvalidInput("index directory lacks " + std::string(kLexiconFile));
  loaded.lexicon = read_lexicon_tsv(lex, loaded.index.store().num_docs());
  return loaded;
}

int cmd_index(const ConfigFlags& flags, const std::string& corpus_path, const std::string& out_dir,
              const std::optional<std::string>& dump_path, std::ostream& err) {
  EngineConfig config = flags.resolve(std::nullopt);
  const auto corpus = read_corpus_file(corpus_path);
  if (corpus.empty()) throw InvalidInput("corpus '" + corpus_path + "' holds no documents");
  Lexicon lexicon = build_lexicon(std::span<const CorpusDocument>(corpus));

  std::vector<DocumentEntry> docs;
  if (dump_path) {
    docs = read_embedding_dump(*dump_path);
    if (docs.size() != corpus.size()) {
      throw InvalidInput("embedding dump holds " + std::to_string(docs.size()) +
                         " documents, corpus holds " + std::to_string(corpus.size()));
    }
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (docs[i].doc_id != corpus[i].doc_id) {
        throw InvalidInput("embedding dump document " + std::to_string(i) + " is '" +
                           docs[i].doc_id + "', corpus has '" + corpus[i].doc_id + "'");
      }
    }
    const std::size_t dump_dim = docs.front().embeddings.front().dim();
    if (flags.dim && *flags.dim != dump_dim) {
      throw InvalidConfig("--dim does not match the embedding dump dim " + std::to_string(dump_dim));
    }
    config.dim = dump_dim;
  } else {
    const ToyEmbedder embedder(config.dim, config.seed);
    docs.reserve(corpus.size());
    for (const auto& doc : corpus) docs.push_back(embed_document(doc, embedder));
  }

  auto store = std::make_shared<const EmbeddingStore>(EmbeddingStore::from_documents(docs));
  docs.clear();
  const KMeansParams params{config.sample_fraction, config.n_list, config.iterations, config.seed};
  const Centroids centroids = train_kmeans(*store, params).centroids;
  const IvfIndex index = build_ivf(store, centroids);
  config.n_list = index.n_list();
  echo_config(config, err);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  save_index(index, (dir / kIndexFile).string());
  {
    std::ofstream lex((dir / kLexiconFile).string(), std::ios::trunc);
    if (!lex) throw InvalidInput("cannot write lexicon to '" + out_dir + "'");
    write_lexicon_tsv(lexicon, lex);
  }
  save_config_file(config, (dir / kConfigFile).string());
  err << "indexed " << store->num_docs() << " documents, " << store->num_embeddings()
      << " embeddings, " << index.n_list() << " partitions\n";
  return kExitOk;
}

int cmd_search(const ConfigFlags& flags, const std::string& index_dir, const std::string& query,
               const std::string& qid, const std::string& tag, std::ostream& out,
               std::ostream& err) {
  const LoadedIndex loaded = open_index(require_index_dir(index_dir), flags, err);
  const EngineConfig& c = loaded.config;
  echo_config(c, err);
  const Searcher searcher(loaded.index, loaded.lexicon, ToyEmbedder(c.dim, c.seed), c.q_len);
  const SearchResult result = searcher.search(query, c.pruning(), c.k);
  write_run(out, qid, result.ranking, tag);
  err << "candidates: " << result.candidates.size() << '\n';
  return kExitOk;
}

std::vector<std::size_t> parse_p_values(const std::string& spec, std::size_t q_len) {
  if (spec.empty()) {
    std::vector<std::size_t> all(q_len);
    for (std::size_t i = 0; i < q_len; ++i) all[i] = i + 1;
    return all;
  }
  std::vector<std::size_t> values;
  std::stringstream ss(spec);
  std::string item;
  auto number = [&](const std::string& s) -> std::size_t {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw InvalidConfig("bad --p-values entry '" + s + "'");
  };
  while (std::getline(ss, item, ',')) {
    if (const auto dash = item.find('-'); dash != std::string::npos) {
      const auto lo = number(item.substr(0, dash)), hi = number(item.substr(dash + 1));
      if (lo > hi) throw InvalidConfig("bad --p-values range '" + item + "'");
      for (auto v = lo; v <= hi; ++v) values.push_back(v);
    } else {
      values.push_back(number(item));
    }
  }
  for (std::size_t v : values) {
    if (v < 1 || v > q_len) {
      throw InvalidConfig("p must satisfy 1 <= p <= q_len (got p=" + std::to_string(v) +
                          ", q_len=" + std::to_string(q_len) + ")");
    }
  }
  return values;
}

int cmd_sweep(const ConfigFlags& flags, const std::string& index_dir, const std::string& queries_path,
              const std::string& qrels_path, const std::string& out_path,
              const std::vector<std::string>& strategy_names, const std::string& p_spec,
              std::size_t threads, std::ostream& err) {
  const LoadedIndex loaded = open_index(require_index_dir(index_dir), flags, err);
  const EngineConfig& c = loaded.config;
  echo_config(c, err);

  std::vector<Strategy> strategies;
  for (const auto& name : strategy_names) {
    const auto s = parse_strategy(name);
    if (!s) throw InvalidConfig("strategy must be one of first, icf, idf (got '" + name + "')");
    strategies.push_back(*s);
  }
  const auto p_values = parse_p_values(p_spec, c.q_len);
  const auto queries = read_queries_file(queries_path);
  const Qrels qrels = read_qrels_file(qrels_path);

  const Searcher searcher(loaded.index, loaded.lexicon, ToyEmbedder(c.dim, c.seed), c.q_len);
  const SweepOptions options{c.k_prime, c.n_probe, c.k, 0.05, threads};
  const SweepTable table = sweep(queries, qrels, searcher, strategies, p_values, options);

  std::ofstream out(out_path, std::ios::trunc | std::ios::binary);
  if (!out) throw InvalidInput("cannot write sweep output '" + out_path + "'");
  write_sweep_csv(table, out);
  err << "swept " << queries.size() << " queries over " << table.rows.size() << " settings\n";
  return kExitOk;
}

int cmd_eval(const std::string& run_path, const std::string& qrels_path, std::ostream& out) {
  const Run run = read_run_file(run_path);
  const Qrels qrels = read_qrels_file(qrels_path);
  const MetricSummary s = evaluate_run(run, qrels);
  char buf[256];
  std::snprintf(buf, sizeof buf, "num_q\tall\t%zu\nndcg_cut_10\tall\t%.4f\nmap\tall\t%.4f\nrecip_rank_10\tall\t%.4f\n",
                s.num_queries, s.ndcg10, s.map, s.mrr10);
  out << buf;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-vector dense retrieval with query embedding pruning", "mve"};
  app.require_subcommand(1);

  ConfigFlags index_flags, search_flags, sweep_flags;

  auto* index_cmd = app.add_subcommand("index", "build lexicon, embedding store and IVF index");
  std::string corpus_path, index_out;
  std::optional<std::string> dump_path;
  index_cmd->add_option("--corpus", corpus_path, "doc_id<TAB>text corpus")->required();
  index_cmd->add_option("--out", index_out, "output index directory")->required();
  index_cmd->add_option("--embeddings-dump", dump_path, "MVED file of precomputed document embeddings");
  index_flags.attach(*index_cmd);

  auto* search_cmd = app.add_subcommand("search", "run one query, print a TREC run");
  std::string search_index, query_text, qid = "q0", tag = "mve";
  search_cmd->add_option("--index", search_index, "index directory")->required();
  search_cmd->add_option("--query", query_text, "query text")->required();
  search_cmd->add_option("--qid", qid, "query id written to the run");
  search_cmd->add_option("--tag", tag, "run tag");
  search_flags.attach(*search_cmd);

  auto* sweep_cmd = app.add_subcommand("sweep", "evaluate every (strategy, p) setting");
  std::string sweep_index, queries_path, sweep_qrels, sweep_out, p_spec;
  std::vector<std::string> strategy_names{"first", "icf"};
  std::size_t threads = 1;
  sweep_cmd->add_option("--index", sweep_index, "index directory")->required();
  sweep_cmd->add_option("--queries", queries_path, "qid<TAB>text queries")->required();
  sweep_cmd->add_option("--qrels", sweep_qrels, "TREC qrels")->required();
  sweep_cmd->add_option("--out", sweep_out, "CSV output path")->required();
  sweep_cmd->add_option("--strategies", strategy_names, "strategies to sweep")->delimiter(',');
  sweep_cmd->add_option("--p-values", p_spec, "p values, e.g. 1-32 or 1,2,4 (default 1..q_len)");
  sweep_cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  sweep_flags.attach(*sweep_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "score a TREC run against qrels");
  std::string run_path, eval_qrels;
  eval_cmd->add_option("--run", run_path, "TREC run file")->required();
  eval_cmd->add_option("--qrels", eval_qrels, "TREC qrels")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    err << app.help();
    return kExitInvalid;
  }

  try {
    if (index_cmd->parsed()) return cmd_index(index_flags, corpus_path, index_out, dump_path, err);
    if (search_cmd->parsed()) return cmd_search(search_flags, search_index, query_text, qid, tag, out, err);
    if (sweep_cmd->parsed()) {
      return cmd_sweep(sweep_flags, sweep_index, queries_path, sweep_qrels, sweep_out,
                       strategy_names, p_spec, threads, err);
    }
    return cmd_eval(run_path, eval_qrels, out);
  } catch (const CorruptIndex& e) {
    err << "error: " << e.what() << '\n';
    return kExitCorruptIndex;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
}

}  // namespace mve::cli
