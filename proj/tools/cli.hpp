#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pft/config.hpp"
#include "pft/dataset.hpp"
#include "pft/retrieval.hpp"

namespace pft::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kDataError = 3, kDivergence = 4 };

// Entry point shared by the `pft` binary and the tests.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

// A record source is either a manifest path or
//   synth:seed=S,ids=N,variants=A-B[,cameras=C]
std::vector<DatasetRecord> load_records(const std::string& source, ImageSize size);
// A single image is either a P6 file or synth:seed=S,id=I,variant=V[,cam=C]
DatasetRecord load_image(const std::string& source, ImageSize size);

struct TrainArgs {
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> ablation;
};

struct EvalArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path config;  // default: config.json beside the checkpoint
  std::string query;
  std::string gallery;
  std::string metric = "cosine";
  std::size_t max_rank = 20;
  bool exclusion = true;
};

struct InspectArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path config;
  std::string image;
  std::filesystem::path out;
};

int cmd_train(const TrainArgs& args);
int cmd_eval(const EvalArgs& args);
int cmd_inspect(const InspectArgs& args);

}  // namespace pft::cli
