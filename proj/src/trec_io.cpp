#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "mve/error.hpp"
#include "mve/eval.hpp"

namespace mve {
namespace {

std::ifstream open_or_throw(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw InvalidInput(std::string("cannot open ") + what + " file '" + path + "'");
  return in;
}

std::string where(const char* file, std::size_t line_no) {
  return std::string(file) + " line " + std::to_string(line_no);
}

}  // namespace

Qrels read_qrels(std::istream& in) {
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string qid, iter, doc;
    int grade = 0;
    if (!(fields >> qid)) continue;
    if (!(fields >> iter >> doc >> grade)) {
      throw InvalidInput(where("qrels", line_no) + ": expected 'qid 0 doc_id grade'");
    }
    qrels.add(std::move(qid), std::move(doc), grade);
  }
  return qrels;
}

Qrels read_qrels_file(const std::string& path) {
  auto in = open_or_throw(path, "qrels");
  return read_qrels(in);
}

std::vector<SweepQuery> read_queries(std::istream& in) {
  std::vector<SweepQuery> queries;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw InvalidInput(where("queries", line_no) + ": expected qid<TAB>text");
    }
    SweepQuery q{line.substr(0, tab), line.substr(tab + 1)};
    if (!seen.insert(q.qid).second) {
      throw InvalidInput(where("queries", line_no) + ": duplicate qid '" + q.qid + "'");
    }
    queries.push_back(std::move(q));
  }
  return queries;
}

std::vector<SweepQuery> read_queries_file(const std::string& path) {
  auto in = open_or_throw(path, "queries");
  return read_queries(in);
}

void write_run(std::ostream& out, std::string_view qid, const Ranking& ranking,
               std::string_view tag) {
  char score[64];
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    const auto& e = ranking.entries[i];
    std::snprintf(score, sizeof score, "%.6f", static_cast<double>(e.score));
    out << qid << " Q0 " << e.doc_id << ' ' << (i + 1) << ' ' << score << ' ' << tag << '\n';
  }
}

Run read_run(std::istream& in) {
  struct Line {
    std::string doc;
    double score;
  };
  std::map<std::string, std::vector<Line>, std::less<>> lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string qid, q0, doc, tag;
    long long rank = 0;
    double score = 0.0;
    if (!(fields >> qid)) continue;
    if (!(fields >> q0 >> doc >> rank >> score)) {
      throw InvalidInput(where("run", line_no) + ": expected 'qid Q0 doc_id rank score tag'");
    }
    lines[qid].push_back({std::move(doc), score});
  }
  Run run;
  for (auto& [qid, entries] : lines) {
    std::sort(entries.begin(), entries.end(), [](const Line& a, const Line& b) {
      return a.score > b.score || (a.score == b.score && a.doc < b.doc);
    });
    auto& ranked = run[qid];
    for (auto& e : entries) ranked.push_back(std::move(e.doc));
  }
  return run;
}

Run read_run_file(const std::string& path) {
  auto in = open_or_throw(path, "run");
  return read_run(in);
}

MetricSummary evaluate_run(const Run& run, const Qrels& qrels) {
  std::set<std::string, std::less<>> qids;
  for (const auto& [qid, _] : run) qids.insert(qid);
  for (const auto& [qid, _] : qrels.queries()) qids.insert(qid);

  MetricSummary summary;
  summary.num_queries = qids.size();
  if (qids.empty()) return summary;
  static const std::vector<std::string> kNothing;
  for (const auto& qid : qids) {
    auto it = run.find(qid);
    const auto& ranked = it == run.end() ? kNothing : it->second;
    const Judgements& judged = qrels.judgements(qid);
    summary.ndcg10 += ndcg_at(ranked, judged);
    summary.map += average_precision(ranked, judged);
    summary.mrr10 += rr_at(ranked, judged);
  }
  const auto n = static_cast<double>(qids.size());
  summary.ndcg10 /= n;
  summary.map /= n;
  summary.mrr10 /= n;
  return summary;
}

}  // namespace mve
