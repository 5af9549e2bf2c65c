#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mve/retrieval.hpp"

namespace mve {

/// Relevance grades of one query, doc_id -> grade. Unjudged docs are grade 0.
using Judgements = std::map<std::string, int, std::less<>>;

class Qrels {
 public:
  /// Throws InvalidInput on a negative grade.
  void add(std::string qid, std::string doc_id, int grade);

  int grade(std::string_view qid, std::string_view doc_id) const noexcept;
  /// Empty judgements for unknown queries.
  const Judgements& judgements(std::string_view qid) const noexcept;
  const std::map<std::string, Judgements, std::less<>>& queries() const noexcept { return by_query_; }

 private:
  std::map<std::string, Judgements, std::less<>> by_query_;
};

inline constexpr std::size_t kDefaultCutoff = 10;

/// Gain = grade, discount 1/log2(rank + 1); the ideal DCG is taken over the
/// judged documents truncated at the same cutoff. 0 when nothing is relevant.
double ndcg_at(std::span<const std::string> ranked, const Judgements& judged,
               std::size_t cutoff = kDefaultCutoff);
double ndcg_at(const Ranking& ranking, const Judgements& judged, std::size_t cutoff = kDefaultCutoff);

/// Relevant means grade >= 1. Relevant docs never retrieved contribute 0;
/// queries without relevant docs score 0.
double average_precision(std::span<const std::string> ranked, const Judgements& judged);
double average_precision(const Ranking& ranking, const Judgements& judged);

double rr_at(std::span<const std::string> ranked, const Judgements& judged,
             std::size_t cutoff = kDefaultCutoff);
double rr_at(const Ranking& ranking, const Judgements& judged, std::size_t cutoff = kDefaultCutoff);

struct CandidateCounts {
  std::size_t retrieved = 0;
  std::size_t relevant_retrieved = 0;

  friend bool operator==(const CandidateCounts&, const CandidateCounts&) = default;
};

CandidateCounts candidate_counts(const CandidateSet& candidates, const EmbeddingStore& store,
                                 const Judgements& judged);

struct TTestResult {
  double t = 0.0;
  double p_value = 1.0;
  bool significant = false;
};

/// Two-sided paired t-test on a - b with n - 1 degrees of freedom,
/// significant iff p < alpha / num_comparisons.
TTestResult paired_t_test_bonferroni(std::span<const double> a, std::span<const double> b,
                                     std::size_t num_comparisons, double alpha = 0.05);

struct SweepQuery {
  std::string qid;
  std::string text;
};

struct SweepRow {
  Strategy strategy = Strategy::kFirst;
  std::size_t p = 0;
  double ndcg10 = 0.0;
  double map = 0.0;
  double mrr10 = 0.0;
  double mean_docs = 0.0;
  double mean_rel_docs = 0.0;
  bool sig_ndcg10 = false;
  bool sig_map = false;
  bool sig_mrr10 = false;
};

struct SweepTable {
  /// One row per (strategy, p), strategies in the requested order, p ascending.
  std::vector<SweepRow> rows;
  /// FIRST at p = q_len: the unpruned reference every row is tested against.
  SweepRow baseline;
};

struct SweepOptions {
  std::size_t k_prime = 1000;
  std::size_t n_probe = 10;
  /// Final ranking depth used for MAP.
  std::size_t k = 1000;
  double alpha = 0.05;
  std::size_t threads = 1;
};

/// Runs every query once per (strategy, p). First-stage results and exact
/// scores are shared across the grid for each query; each cell equals what
/// Searcher::search returns for the same settings. Significance uses a
/// Bonferroni family of |strategies| * |p_values| * 3 comparisons.
SweepTable sweep(std::span<const SweepQuery> queries, const Qrels& qrels, const Searcher& searcher,
                 std::span<const Strategy> strategies, std::span<const std::size_t> p_values,
                 const SweepOptions& options);

/// `strategy,p,ndcg10,map,mrr10,mean_docs,mean_rel_docs,sig_ndcg10,sig_map,sig_mrr10`
void write_sweep_csv(const SweepTable& table, std::ostream& out);

/// `qid 0 doc_id grade` lines.
Qrels read_qrels(std::istream& in);
Qrels read_qrels_file(const std::string& path);

/// `qid<TAB>text` lines.
std::vector<SweepQuery> read_queries(std::istream& in);
std::vector<SweepQuery> read_queries_file(const std::string& path);

/// `qid Q0 doc_id rank score tag` lines.
void write_run(std::ostream& out, std::string_view qid, const Ranking& ranking,
               std::string_view tag);

/// Ranked doc ids per query, ordered by descending score, ties by ascending doc_id.
using Run = std::map<std::string, std::vector<std::string>, std::less<>>;
Run read_run(std::istream& in);
Run read_run_file(const std::string& path);

struct MetricSummary {
  std::size_t num_queries = 0;
  double ndcg10 = 0.0;
  double map = 0.0;
  double mrr10 = 0.0;
};

/// Means over every query that appears in the run or the qrels, summed in qid order.
MetricSummary evaluate_run(const Run& run, const Qrels& qrels);

}  // namespace mve
