#include "pft/evaluation.hpp"

#include <algorithm>

#include "pft/errors.hpp"

namespace pft {

Tensor embed_records(PftModel& model, std::span<const DatasetRecord> records) {
  if (records.empty()) throw DataError("no images to embed");
  const std::size_t d = model.embedding_dim();
  Tensor out({records.size(), d});
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Tensor e = model.embed(records[i].image);
    std::copy(e.data().begin(), e.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return out;
}

RetrievalReport evaluate_model(PftModel& model, std::span<const DatasetRecord> query,
                               std::span<const DatasetRecord> gallery, Metric metric, const EvalOptions& options) {
  const Tensor dist = distance_matrix(embed_records(model, query), embed_records(model, gallery), metric);
  std::vector<std::size_t> qid, gid, qcam, gcam;
  for (const auto& r : query) {
    qid.push_back(r.person_id);
    qcam.push_back(r.camera_id);
  }
  for (const auto& r : gallery) {
    gid.push_back(r.person_id);
    gcam.push_back(r.camera_id);
  }
  return evaluate(dist, qid, gid, qcam, gcam, options);
}

}  // namespace pft
