#include "cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pft/checkpoint.hpp"
#include "pft/errors.hpp"
#include "pft/evaluation.hpp"
#include "pft/frm.hpp"
#include "pft/image_io.hpp"
#include "pft/model.hpp"
#include "pft/trainer.hpp"

namespace pft::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSynthPrefix = "synth:";

std::map<std::string, std::string> parse_synth_spec(const std::string& spec) {
  std::map<std::string, std::string> kv;
  std::stringstream in(spec.substr(std::string(kSynthPrefix).size()));
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("synthetic spec '" + spec + "': bad item '" + item + "'");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return kv;
}

std::size_t to_size(const std::string& spec, const std::string& key, const std::string& value) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size() || value.front() == '-') {
    throw ConfigError("synthetic spec '" + spec + "': " + key + " must be a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

void reject_unknown(const std::string& spec, const std::map<std::string, std::string>& kv,
                    std::initializer_list<const char*> allowed) {
  for (const auto& [k, v] : kv) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError("synthetic spec '" + spec + "': unknown key '" + k + "'");
  }
}

bool is_synth(const std::string& source) {
  return source.rfind(kSynthPrefix, 0) == 0;
}

fs::path config_beside(const fs::path& checkpoint, const fs::path& explicit_config) {
  if (!explicit_config.empty()) return explicit_config;
  return checkpoint.parent_path() / "config.json";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

struct LoadedModel {
  RunConfig config;
  std::unique_ptr<PftModel> model;
};

LoadedModel load_model(const fs::path& checkpoint, const fs::path& config_path) {
  LoadedModel m{load_config(config_beside(checkpoint, config_path)), nullptr};
  m.model = std::make_unique<PftModel>(m.config.model, m.config.train.seed);
  restore(*m.model, load_checkpoint(checkpoint));
  return m;
}

}  // namespace

std::vector<DatasetRecord> load_records(const std::string& source, ImageSize size) {
  if (!is_synth(source)) return load_manifest(source, size);
  const auto kv = parse_synth_spec(source);
  reject_unknown(source, kv, {"seed", "ids", "variants", "cameras"});
  SynthSpec spec;
  if (kv.count("seed")) spec.seed = to_size(source, "seed", kv.at("seed"));
  if (kv.count("ids")) spec.ids = to_size(source, "ids", kv.at("ids"));
  if (kv.count("cameras")) spec.cameras = to_size(source, "cameras", kv.at("cameras"));
  if (kv.count("variants")) {
    const std::string& v = kv.at("variants");
    const auto dash = v.find('-');
    if (dash == std::string::npos) {
      spec.first_variant = 0;
      spec.variants = to_size(source, "variants", v);
    } else {
      const std::size_t lo = to_size(source, "variants", v.substr(0, dash));
      const std::size_t hi = to_size(source, "variants", v.substr(dash + 1));
      if (hi < lo) throw ConfigError("synthetic spec '" + source + "': empty variant range");
      spec.first_variant = lo;
      spec.variants = hi - lo + 1;
    }
  }
  return generate_dataset(spec, size);
}

DatasetRecord load_image(const std::string& source, ImageSize size) {
  if (!is_synth(source)) {
    DatasetRecord rec;
    rec.image = resize_bilinear(read_ppm(source), size.height, size.width);
    return rec;
  }
  const auto kv = parse_synth_spec(source);
  reject_unknown(source, kv, {"seed", "id", "variant", "cam"});
  const std::size_t seed = kv.count("seed") ? to_size(source, "seed", kv.at("seed")) : 0;
  const std::size_t id = kv.count("id") ? to_size(source, "id", kv.at("id")) : 0;
  const std::size_t variant = kv.count("variant") ? to_size(source, "variant", kv.at("variant")) : 0;
  const std::size_t cam = kv.count("cam") ? to_size(source, "cam", kv.at("cam")) : variant % 2;
  return generate_identity(seed, id, variant, cam, size);
}

int cmd_train(const TrainArgs& args) {
  RunConfig cfg = load_config(args.config);
  if (args.seed) cfg.train.seed = *args.seed;
  if (args.ablation) cfg.model.modules = parse_ablation(*args.ablation);

  std::vector<DatasetRecord> data = cfg.data.kind == DataSource::Kind::synthetic
                                        ? generate_dataset(cfg.data.synthetic, cfg.image_size())
                                        : load_manifest(cfg.data.manifest, cfg.image_size());
  if (data.empty()) throw DataError("training set is empty");
  cfg.model.num_identities = count_identities(data);
  validate(cfg.model);

  fs::create_directories(args.out);
  write_text(args.out / "config.json", to_json(cfg));

  PftModel model(cfg.model, cfg.train.seed);
  std::ofstream metrics(args.out / "metrics.jsonl", std::ios::binary);
  if (!metrics) throw DataError("cannot write '" + (args.out / "metrics.jsonl").string() + "'");
  const TrainResult result = train(model, cfg.train, data, [&](const StepLog& s) { metrics << s.to_json() << '\n'; });
  metrics.close();
  save_checkpoint(args.out / "checkpoint.pft", snapshot(model));

  nlohmann::json summary;
  summary["topology"] = model.topology();
  summary["parameters"] = model.parameter_count();
  summary["steps"] = result.log.size();
  if (!result.log.empty()) {
    summary["initial_loss"] = result.log.front().loss;
    summary["final_loss"] = result.log.back().loss;
  }
  summary["checkpoint"] = (args.out / "checkpoint.pft").string();
  std::cout << summary.dump() << std::endl;
  return kOk;
}

int cmd_eval(const EvalArgs& args) {
  LoadedModel m = load_model(args.checkpoint, args.config);
  const ImageSize size = m.config.image_size();
  const auto query = load_records(args.query, size);
  const auto gallery = load_records(args.gallery, size);
  EvalOptions options;
  options.max_rank = args.max_rank;
  options.exclude_same_camera = args.exclusion;
  const RetrievalReport report =
      evaluate_model(*m.model, query, gallery, metric_from_string(args.metric), options);
  std::cout << report.to_json() << std::endl;
  return kOk;
}

int cmd_inspect(const InspectArgs& args) {
  LoadedModel m = load_model(args.checkpoint, args.config);
  const DatasetRecord rec = load_image(args.image, m.config.image_size());
  const Grid grid = m.model->grid();

  ad::Tape tape(ad::Tape::Mode::inference);
  const ModelForward fwd = m.model->forward(tape, rec.image);
  const Tensor heat = attention_rollout(fwd.attention, grid);

  fs::create_directories(args.out);
  double peak = 0.0;
  for (double v : heat.data()) peak = std::max(peak, v);
  Tensor scaled = heat;
  for (auto& v : scaled.data()) v = peak > 0.0 ? v / peak : 0.0;
  write_pgm(args.out / "heatmap.pgm", scaled);

  const Tensor& tokens = fwd.global_tokens.value();
  const Tensor patches = Tensor({grid.count, tokens.cols()},
                                std::vector<double>(tokens.data().begin() + static_cast<std::ptrdiff_t>(tokens.cols()),
                                                    tokens.data().end()));
  const Tensor sim = patch_cosine_similarity(patches);
  {
    std::ofstream csv(args.out / "patch_sim.csv", std::ios::binary);
    if (!csv) throw DataError("cannot write '" + (args.out / "patch_sim.csv").string() + "'");
    char buf[32];
    for (std::size_t i = 0; i < grid.count; ++i) {
      for (std::size_t j = 0; j < grid.count; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", sim.at(i, j));
        csv << (j ? "," : "") << buf;
      }
      csv << '\n';
    }
  }

  nlohmann::json summary;
  summary["grid"] = {grid.rows, grid.cols};
  summary["heatmap"] = (args.out / "heatmap.pgm").string();
  summary["patch_similarity"] = (args.out / "patch_sim.csv").string();
  if (rec.occluder) {
    const PatchConfig& p = m.config.model.patch;
    double mass = 0.0;
    for (std::size_t gy = 0; gy < grid.rows; ++gy)
      for (std::size_t gx = 0; gx < grid.cols; ++gx) {
        const std::size_t cy = gy * p.stride + p.patch / 2, cx = gx * p.stride + p.patch / 2;
        if (rec.occluder->contains(cx, cy)) mass += heat.at(gy, gx);
      }
    summary["occluder_heatmap_mass"] = mass;
  } else {
    summary["occluder_heatmap_mass"] = nullptr;
  }
  std::cout << summary.dump() << std::endl;
  return kOk;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Occluded person re-identification transformer: train, evaluate, inspect"};
  app.require_subcommand(1);

  TrainArgs train_args;
  std::uint64_t seed = 0;
  std::string ablation;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a JSON config");
  train_cmd->add_option("--config", train_args.config, "Run configuration (JSON)")->required();
  train_cmd->add_option("--out", train_args.out, "Output directory")->required();
  auto* seed_opt = train_cmd->add_option("--seed", seed, "Override train.seed");
  auto* ablation_opt =
      train_cmd->add_option("--ablation", ablation, "Enabled modules, comma-separated subset of pfde,frm,ssm");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Retrieval evaluation (CMC, mAP) as JSON on stdout");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint)->required();
  eval_cmd->add_option("--config", eval_args.config, "Defaults to config.json beside the checkpoint");
  eval_cmd->add_option("--query", eval_args.query, "Manifest path or synth:... spec")->required();
  eval_cmd->add_option("--gallery", eval_args.gallery, "Manifest path or synth:... spec")->required();
  eval_cmd->add_option("--metric", eval_args.metric)->check(CLI::IsMember({"cosine", "euclidean"}));
  eval_cmd->add_option("--max-rank", eval_args.max_rank)->check(CLI::PositiveNumber);
  bool no_exclusion = false;
  eval_cmd->add_flag("--no-exclusion", no_exclusion, "Keep same-identity same-camera gallery entries");

  InspectArgs inspect_args;
  auto* inspect_cmd = app.add_subcommand("inspect", "Attention rollout heatmap and patch similarity matrix");
  inspect_cmd->add_option("--checkpoint", inspect_args.checkpoint)->required();
  inspect_cmd->add_option("--config", inspect_args.config, "Defaults to config.json beside the checkpoint");
  inspect_cmd->add_option("--image", inspect_args.image, "P6 image or synth:seed=S,id=I,variant=V")->required();
  inspect_cmd->add_option("--out", inspect_args.out)->required();

  std::string synth_out;
  std::string synth_source = "synth:seed=0,ids=8,variants=0-15";
  std::size_t synth_height = 96, synth_width = 48;
  auto* synth_cmd = app.add_subcommand("synth", "Export a synthetic set as a PPM manifest");
  synth_cmd->add_option("--out", synth_out, "Manifest path to write")->required();
  synth_cmd->add_option("--source", synth_source, "synth:... spec");
  synth_cmd->add_option("--height", synth_height);
  synth_cmd->add_option("--width", synth_width);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*train_cmd) {
      if (seed_opt->count()) train_args.seed = seed;
      if (ablation_opt->count()) train_args.ablation = ablation;
      return cmd_train(train_args);
    }
    if (*eval_cmd) {
      eval_args.exclusion = !no_exclusion;
      return cmd_eval(eval_args);
    }
    if (*inspect_cmd) return cmd_inspect(inspect_args);
    if (*synth_cmd) {
      if (!is_synth(synth_source)) throw ConfigError("--source must be a synth:... spec");
      const auto records = load_records(synth_source, ImageSize{synth_height, synth_width, 3});
      write_manifest(synth_out, records);
      std::cout << records.size() << " images written to " << synth_out << std::endl;
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return kConfigError;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return kDataError;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << std::endl;
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kFailure;
  }
  return kFailure;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"pft"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace pft::cli
