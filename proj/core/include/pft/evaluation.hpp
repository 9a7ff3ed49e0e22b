#pragma once

#include <span>

#include "pft/dataset.hpp"
#include "pft/model.hpp"
#include "pft/retrieval.hpp"

namespace pft {

// One retrieval embedding per record, stacked into rows.
Tensor embed_records(PftModel& model, std::span<const DatasetRecord> records);

// Embeds both sets and runs the single-query evaluation.
RetrievalReport evaluate_model(PftModel& model, std::span<const DatasetRecord> query,
                               std::span<const DatasetRecord> gallery, Metric metric = Metric::cosine,
                               const EvalOptions& options = {});

}  // namespace pft
