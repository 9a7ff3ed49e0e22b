#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pft/tensor.hpp"

namespace pft {

enum class Metric { cosine, euclidean };

Metric metric_from_string(const std::string& name);

// q x g distances between the rows of queries[q x d] and gallery[g x d].
// Cosine distance is 1 - cos-sim with norms floored at 1e-12.
Tensor distance_matrix(const Tensor& queries, const Tensor& gallery, Metric metric);

struct EvalOptions {
  std::size_t max_rank = 20;
  // Drop gallery entries sharing both identity and camera with the query.
  bool exclude_same_camera = true;
};

struct RetrievalReport {
  std::vector<double> cmc;  // cmc[k-1] = rank-k accuracy
  double map = 0.0;
  std::size_t excluded_queries = 0;  // queries without any valid match
  std::vector<std::vector<std::size_t>> per_query;  // ranked gallery indices after exclusion
  std::vector<double> average_precision;            // per query; 0 for excluded ones

  std::string to_json() const;
};

// Single-query evaluation: each query ranks the (filtered) gallery by
// ascending distance, ties broken by gallery index.
RetrievalReport evaluate(const Tensor& dist, std::span<const std::size_t> query_ids,
                         std::span<const std::size_t> gallery_ids, std::span<const std::size_t> query_cams,
                         std::span<const std::size_t> gallery_cams, const EvalOptions& options = {});

}  // namespace pft
