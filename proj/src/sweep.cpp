#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "mve/error.hpp"
#include "mve/eval.hpp"
#include "mve/parallel.hpp"

namespace mve {
namespace {

enum Metric : std::size_t { kNdcg = 0, kMap = 1, kMrr = 2, kNumMetrics = 3 };

struct CellResult {
  double metrics[kNumMetrics] = {0.0, 0.0, 0.0};
  CandidateCounts counts;
};

// Exact scores are computed at most once per (query, doc) for the whole grid.
class ScoreCache {
 public:
  ScoreCache(const QueryRepresentation& query, const EmbeddingStore& store)
      : query_(query), store_(store) {}

  float operator()(DocNo doc) {
    auto [it, inserted] = scores_.try_emplace(doc, 0.0f);
    if (inserted) it->second = exact_score(query_, store_.document(doc));
    return it->second;
  }

 private:
  const QueryRepresentation& query_;
  const EmbeddingStore& store_;
  std::unordered_map<DocNo, float> scores_;
};

CellResult evaluate_cell(const CandidateSet& candidates, ScoreCache& scores,
                         const EmbeddingStore& store, const Judgements& judged, std::size_t k) {
  std::vector<std::pair<DocNo, float>> scored;
  scored.reserve(candidates.size());
  for (const auto& [doc, _] : candidates.entries()) scored.emplace_back(doc, scores(doc));
  const Ranking ranking = make_ranking(std::move(scored), store, k);

  CellResult cell;
  cell.metrics[kNdcg] = ndcg_at(ranking, judged);
  cell.metrics[kMap] = average_precision(ranking, judged);
  cell.metrics[kMrr] = rr_at(ranking, judged);
  cell.counts = candidate_counts(candidates, store, judged);
  return cell;
}

}  // namespace

SweepTable sweep(std::span<const SweepQuery> queries, const Qrels& qrels, const Searcher& searcher,
                 std::span<const Strategy> strategies, std::span<const std::size_t> p_values,
                 const SweepOptions& options) {
  if (queries.empty()) throw InvalidInput("sweep needs at least one query");
  if (strategies.empty()) throw InvalidConfig("sweep needs at least one strategy");
  if (p_values.empty()) throw InvalidConfig("sweep needs at least one p value");
  const std::size_t q_len = searcher.q_len();
  std::vector<std::size_t> ps(p_values.begin(), p_values.end());
  std::sort(ps.begin(), ps.end());
  ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
  for (std::size_t p : ps) {
    PruningConfig{Strategy::kFirst, p, options.k_prime, options.n_probe}.validate(
        q_len, searcher.index().n_list());
  }
  std::vector<Strategy> strats;
  for (Strategy s : strategies) {
    if (std::find(strats.begin(), strats.end(), s) == strats.end()) strats.push_back(s);
  }

  const std::size_t num_cells = strats.size() * ps.size();
  const EmbeddingStore& store = searcher.index().store();
  // results[query][cell]; the last slot of each row is the baseline
  std::vector<std::vector<CellResult>> results(queries.size());

  parallel_for(queries.size(), options.threads, [&](std::size_t qi) {
    const QueryRepresentation query = searcher.represent(queries[qi].text);
    const Judgements& judged = qrels.judgements(queries[qi].qid);
    const auto per_embedding =
        per_embedding_candidates(searcher.index(), query, options.k_prime, options.n_probe);
    ScoreCache scores(query, store);

    auto& row = results[qi];
    row.reserve(num_cells + 1);
    for (Strategy s : strats) {
      const auto order = order_embeddings(query, searcher.lexicon(), s);
      std::vector<EmbeddingCandidates> ordered(order.size());
      for (std::size_t i = 0; i < order.size(); ++i) ordered[i] = per_embedding[order[i]];
      CandidateSet candidates;
      std::size_t done = 0;
      for (std::size_t p : ps) {
        for (; done < p; ++done) {
          for (DocNo doc : ordered[done].docs) candidates.add(doc, ordered[done].position);
        }
        row.push_back(evaluate_cell(candidates, scores, store, judged, options.k));
      }
    }
    const CandidateSet full = pruned_union(per_embedding, per_embedding.size());
    row.push_back(evaluate_cell(full, scores, store, judged, options.k));
  });

  // deterministic reduction: queries summed in qid order
  std::vector<std::size_t> by_qid(queries.size());
  std::iota(by_qid.begin(), by_qid.end(), std::size_t{0});
  std::stable_sort(by_qid.begin(), by_qid.end(),
                   [&](std::size_t a, std::size_t b) { return queries[a].qid < queries[b].qid; });

  auto summarize = [&](std::size_t cell) {
    SweepRow row;
    double sums[kNumMetrics] = {0.0, 0.0, 0.0};
    double docs = 0.0, rel_docs = 0.0;
    for (std::size_t qi : by_qid) {
      const CellResult& r = results[qi][cell];
      for (std::size_t m = 0; m < kNumMetrics; ++m) sums[m] += r.metrics[m];
      docs += static_cast<double>(r.counts.retrieved);
      rel_docs += static_cast<double>(r.counts.relevant_retrieved);
    }
    const auto n = static_cast<double>(queries.size());
    row.ndcg10 = sums[kNdcg] / n;
    row.map = sums[kMap] / n;
    row.mrr10 = sums[kMrr] / n;
    row.mean_docs = docs / n;
    row.mean_rel_docs = rel_docs / n;
    return row;
  };
  auto per_query = [&](std::size_t cell, std::size_t metric) {
    std::vector<double> v;
    v.reserve(by_qid.size());
    for (std::size_t qi : by_qid) v.push_back(results[qi][cell].metrics[metric]);
    return v;
  };

  SweepTable table;
  table.baseline = summarize(num_cells);
  table.baseline.strategy = Strategy::kFirst;
  table.baseline.p = q_len;

  const std::size_t family = num_cells * kNumMetrics;
  const bool testable = queries.size() >= 2;
  std::vector<double> base[kNumMetrics];
  for (std::size_t m = 0; m < kNumMetrics; ++m) base[m] = per_query(num_cells, m);

  for (std::size_t si = 0; si < strats.size(); ++si) {
    for (std::size_t pi = 0; pi < ps.size(); ++pi) {
      const std::size_t cell = si * ps.size() + pi;
      SweepRow row = summarize(cell);
      row.strategy = strats[si];
      row.p = ps[pi];
      if (testable) {
        bool* flags[kNumMetrics] = {&row.sig_ndcg10, &row.sig_map, &row.sig_mrr10};
        for (std::size_t m = 0; m < kNumMetrics; ++m) {
          *flags[m] =
              paired_t_test_bonferroni(per_query(cell, m), base[m], family, options.alpha).significant;
        }
      }
      table.rows.push_back(row);
    }
  }
  return table;
}

void write_sweep_csv(const SweepTable& table, std::ostream& out) {
  out << "strategy,p,ndcg10,map,mrr10,mean_docs,mean_rel_docs,sig_ndcg10,sig_map,sig_mrr10\n";
  char buf[256];
  for (const auto& r : table.rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.6f,%.6f,%.6f,%.4f,%.4f,%d,%d,%d\n",
                  std::string(to_string(r.strategy)).c_str(), r.p, r.ndcg10, r.map, r.mrr10,
                  r.mean_docs, r.mean_rel_docs, r.sig_ndcg10 ? 1 : 0, r.sig_map ? 1 : 0,
                  r.sig_mrr10 ? 1 : 0);
    out << buf;
  }
}

}  // namespace mve
