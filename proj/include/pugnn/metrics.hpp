#pragma once

// Classification metrics of the benchmark: F1, rank-statistic AUC (ties get
// half credit), TPR (sensitivity) and TNR (specificity), plus the raw
// confusion counts. Classification threshold is score > 0.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace pugnn {

struct MetricsReport {
  double f1 = 0.0;
  double auc = 0.0;
  double tpr = 0.0;
  double tnr = 0.0;
  long tp = 0, fp = 0, fn = 0, tn = 0;
  bool degenerate_f1 = false;  // no predicted and no actual positives
};

// AUC as the probability that a random positive outranks a random negative,
// computed from average ranks; tied pairs count 0.5.
inline double rank_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  const size_t n = scores.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] < scores[b]; });

  std::vector<double> rank(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }

  double pos_rank_sum = 0.0;
  long n_pos = 0, n_neg = 0;
  for (size_t k = 0; k < n; ++k) {
    if (labels[k] == 1) {
      pos_rank_sum += rank[k];
      ++n_pos;
    } else {
      ++n_neg;
    }
  }
  double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

inline MetricsReport compute_metrics(const std::vector<double>& scores,
                                     const std::vector<int>& true_labels) {
  if (scores.size() != true_labels.size())
    throw std::invalid_argument("compute_metrics: scores and labels differ in length");
  if (scores.empty()) throw std::invalid_argument("compute_metrics: empty input");
  long n_pos = 0, n_neg = 0;
  for (int y : true_labels) {
    if (y != 1 && y != -1) throw std::invalid_argument("compute_metrics: labels must be +1 or -1");
    (y == 1 ? n_pos : n_neg)++;
  }
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("compute_metrics: AUC undefined for single-class ground truth");

  MetricsReport r;
  for (size_t i = 0; i < scores.size(); ++i) {
    bool pred_pos = scores[i] > 0.0;
    bool is_pos = true_labels[i] == 1;
    r.tp += pred_pos && is_pos;
    r.fp += pred_pos && !is_pos;
    r.fn += !pred_pos && is_pos;
    r.tn += !pred_pos && !is_pos;
  }
  if (2 * r.tp + r.fp + r.fn == 0) {
    r.degenerate_f1 = true;
    r.f1 = 0.0;
    std::fprintf(stderr, "warning: degenerate F1 (no predicted and no actual positives), defined as 0\n");
  } else {
    r.f1 = 2.0 * r.tp / static_cast<double>(2 * r.tp + r.fp + r.fn);
  }
  r.tpr = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  r.tnr = static_cast<double>(r.tn) / static_cast<double>(r.tn + r.fp);
  r.auc = rank_auc(scores, true_labels);
  return r;
}

struct MetricsAggregate {
  double f1_mean = 0, f1_std = 0;
  double auc_mean = 0, auc_std = 0;
  double tpr_mean = 0, tpr_std = 0;
  double tnr_mean = 0, tnr_std = 0;
  std::vector<MetricsReport> runs;
};

inline MetricsAggregate aggregate_metrics(std::vector<MetricsReport> runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate_metrics: no runs");
  auto stats = [&](auto field, double& mean, double& sd) {
    mean = 0.0;
    for (const auto& r : runs) mean += r.*field;
    mean /= runs.size();
    double v = 0.0;
    for (const auto& r : runs) v += (r.*field - mean) * (r.*field - mean);
    sd = runs.size() > 1 ? std::sqrt(v / runs.size()) : 0.0;
  };
  MetricsAggregate a;
  stats(&MetricsReport::f1, a.f1_mean, a.f1_std);
  stats(&MetricsReport::auc, a.auc_mean, a.auc_std);
  stats(&MetricsReport::tpr, a.tpr_mean, a.tpr_std);
  stats(&MetricsReport::tnr, a.tnr_mean, a.tnr_std);
  a.runs = std::move(runs);
  return a;
}

}  // namespace pugnn
