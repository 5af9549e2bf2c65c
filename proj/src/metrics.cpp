#include <algorithm>
#include <cmath>
#include <functional>

#include "mve/error.hpp"
#include "mve/eval.hpp"

namespace mve {

void Qrels::add(std::string qid, std::string doc_id, int grade) {
  if (grade < 0) {
    throw InvalidInput("negative relevance grade for (" + qid + ", " + doc_id + ")");
  }
  by_query_[std::move(qid)][std::move(doc_id)] = grade;
}

int Qrels::grade(std::string_view qid, std::string_view doc_id) const noexcept {
  const Judgements& j = judgements(qid);
  auto it = j.find(doc_id);
  return it == j.end() ? 0 : it->second;
}

const Judgements& Qrels::judgements(std::string_view qid) const noexcept {
  static const Judgements kEmpty;
  auto it = by_query_.find(qid);
  return it == by_query_.end() ? kEmpty : it->second;
}

namespace {

int grade_of(const Judgements& judged, const std::string& doc) {
  auto it = judged.find(doc);
  return it == judged.end() ? 0 : it->second;
}

std::vector<std::string> ids_of(const Ranking& ranking) {
  std::vector<std::string> ids;
  ids.reserve(ranking.size());
  for (const auto& e : ranking.entries) ids.push_back(e.doc_id);
  return ids;
}

}  // namespace

double ndcg_at(std::span<const std::string> ranked, const Judgements& judged, std::size_t cutoff) {
  if (cutoff < 1) throw InvalidConfig("cutoff must be >= 1");
  std::vector<int> ideal;
  for (const auto& [_, g] : judged) {
    if (g > 0) ideal.push_back(g);
  }
  if (ideal.empty()) return 0.0;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());

  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(cutoff, ideal.size()); ++i) {
    idcg += ideal[i] / std::log2(static_cast<double>(i) + 2.0);
  }
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(cutoff, ranked.size()); ++i) {
    dcg += grade_of(judged, ranked[i]) / std::log2(static_cast<double>(i) + 2.0);
  }
  return dcg / idcg;
}

double ndcg_at(const Ranking& ranking, const Judgements& judged, std::size_t cutoff) {
  const auto ids = ids_of(ranking);
  return ndcg_at(ids, judged, cutoff);
}

double average_precision(std::span<const std::string> ranked, const Judgements& judged) {
  const auto relevant = std::count_if(judged.begin(), judged.end(),
                                      [](const auto& kv) { return kv.second >= 1; });
  if (relevant == 0) return 0.0;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (grade_of(judged, ranked[i]) >= 1) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(relevant);
}

double average_precision(const Ranking& ranking, const Judgements& judged) {
  const auto ids = ids_of(ranking);
  return average_precision(ids, judged);
}

double rr_at(std::span<const std::string> ranked, const Judgements& judged, std::size_t cutoff) {
  if (cutoff < 1) throw InvalidConfig("cutoff must be >= 1");
  for (std::size_t i = 0; i < std::min(cutoff, ranked.size()); ++i) {
    if (grade_of(judged, ranked[i]) >= 1) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

double rr_at(const Ranking& ranking, const Judgements& judged, std::size_t cutoff) {
  const auto ids = ids_of(ranking);
  return rr_at(ids, judged, cutoff);
}

CandidateCounts candidate_counts(const CandidateSet& candidates, const EmbeddingStore& store,
                                 const Judgements& judged) {
  CandidateCounts counts;
  counts.retrieved = candidates.size();
  for (const auto& [doc, _] : candidates.entries()) {
    if (grade_of(judged, store.doc_id(doc)) >= 1) ++counts.relevant_retrieved;
  }
  return counts;
}

}  // namespace mve
