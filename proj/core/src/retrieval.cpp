#include "pft/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "pft/errors.hpp"

namespace pft {

Metric metric_from_string(const std::string& name) {
  if (name == "cosine") return Metric::cosine;
  if (name == "euclidean") return Metric::euclidean;
  throw ConfigError("unknown metric '" + name + "' (expected cosine or euclidean)");
}

Tensor distance_matrix(const Tensor& queries, const Tensor& gallery, Metric metric) {
  if (queries.rank() != 2 || gallery.rank() != 2 || queries.cols() != gallery.cols()) {
    throw ShapeError("distance_matrix: feature widths differ, " + shape_str(queries.shape()) + " vs " +
                     shape_str(gallery.shape()));
  }
  const std::size_t q = queries.rows(), g = gallery.rows(), d = queries.cols();
  auto norms = [d](const Tensor& m) {
    std::vector<double> n(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += m.at(i, k) * m.at(i, k);
      n[i] = std::max(std::sqrt(s), 1e-12);
    }
    return n;
  };
  Tensor out({q, g});
  if (metric == Metric::cosine) {
    const auto nq = norms(queries), ng = norms(gallery);
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t j = 0; j < g; ++j) {
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) dot += queries.at(i, k) * gallery.at(j, k);
        out.at(i, j) = 1.0 - dot / (nq[i] * ng[j]);
      }
  } else {
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t j = 0; j < g; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          const double diff = queries.at(i, k) - gallery.at(j, k);
          s += diff * diff;
        }
        out.at(i, j) = std::sqrt(s);
      }
  }
  return out;
}

RetrievalReport evaluate(const Tensor& dist, std::span<const std::size_t> query_ids,
                         std::span<const std::size_t> gallery_ids, std::span<const std::size_t> query_cams,
                         std::span<const std::size_t> gallery_cams, const EvalOptions& options) {
  if (dist.rank() != 2 || dist.rows() != query_ids.size() || dist.cols() != gallery_ids.size() ||
      query_cams.size() != query_ids.size() || gallery_cams.size() != gallery_ids.size()) {
    throw ShapeError("evaluate: distance matrix " + shape_str(dist.shape()) + " does not match " +
                     std::to_string(query_ids.size()) + " queries and " + std::to_string(gallery_ids.size()) +
                     " gallery entries");
  }
  if (options.max_rank == 0) throw ConfigError("evaluate: max_rank must be >= 1");
  const std::size_t nq = dist.rows(), ng = dist.cols();
  RetrievalReport report;
  report.cmc.assign(options.max_rank, 0.0);
  report.per_query.resize(nq);
  report.average_precision.assign(nq, 0.0);

  std::size_t valid = 0;
  double ap_total = 0.0;
  for (std::size_t i = 0; i < nq; ++i) {
    std::vector<std::size_t> order;
    order.reserve(ng);
    for (std::size_t j = 0; j < ng; ++j) {
      const bool same = gallery_ids[j] == query_ids[i] && gallery_cams[j] == query_cams[i];
      if (!(options.exclude_same_camera && same)) order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dist.at(i, a) < dist.at(i, b); });

    std::size_t hits = 0, first_hit = order.size();
    double precision_sum = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (gallery_ids[order[r]] != query_ids[i]) continue;
      if (hits == 0) first_hit = r;
      ++hits;
      precision_sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
    report.per_query[i] = std::move(order);
    if (hits == 0) {
      ++report.excluded_queries;
      continue;
    }
    ++valid;
    report.average_precision[i] = precision_sum / static_cast<double>(hits);
    ap_total += report.average_precision[i];
    for (std::size_t k = first_hit; k < options.max_rank; ++k) report.cmc[k] += 1.0;
  }
  if (valid > 0) {
    for (auto& c : report.cmc) c /= static_cast<double>(valid);
    report.map = ap_total / static_cast<double>(valid);
  }
  return report;
}

std::string RetrievalReport::to_json() const {
  nlohmann::json j;
  j["cmc"] = cmc;
  j["map"] = map;
  j["excluded_queries"] = excluded_queries;
  return j.dump();
}

}  // namespace pft
