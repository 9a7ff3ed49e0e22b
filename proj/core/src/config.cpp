#include "pft/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pft/errors.hpp"

namespace pft {

using nlohmann::json;

namespace {

// Reads fields of one JSON object, recording which keys were consumed so
// leftovers can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(label() + ": expected an object");
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(field(key) + ": unknown field");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, field(key));
  }

  void size(const std::string& key, std::size_t& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ConfigError(field(key) + ": expected a non-negative integer");
    }
    out = v.get<std::size_t>();
  }

  void u64(const std::string& key, std::uint64_t& out) {
    std::size_t v = out;
    size(key, v);
    out = v;
  }

  void number(const std::string& key, double& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(field(key) + ": expected a number");
    out = v.get<double>();
  }

  void boolean(const std::string& key, bool& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(field(key) + ": expected true or false");
    out = v.get<bool>();
  }

  void string(const std::string& key, std::string& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(field(key) + ": expected a string");
    out = v.get<std::string>();
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  bool take(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  std::string label() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Fn>
void rethrow_with_field(const std::string& field, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  Section top(root, "");

  {
    Section m = top.child("model");
    PatchConfig& p = cfg.model.patch;
    m.size("height", p.height);
    m.size("width", p.width);
    m.size("channels", p.channels);
    m.size("patch", p.patch);
    m.size("stride", p.stride);
    m.size("dim", p.dim);
    m.size("depth", cfg.model.depth);
    m.size("heads", cfg.model.heads);
    m.size("mlp_ratio", cfg.model.mlp_ratio);
    m.number("init_std", cfg.model.init_std);
    m.size("num_identities", cfg.model.num_identities);
    m.finish();
  }
  {
    Section mod = top.child("modules");
    mod.boolean("pfde", cfg.model.modules.pfde);
    mod.boolean("frm", cfg.model.modules.frm);
    mod.boolean("ssm", cfg.model.modules.ssm);
    mod.finish();
  }
  {
    Section pf = top.child("pfde");
    pf.number("beta", cfg.model.beta);
    std::string init = to_string(cfg.model.lpde_init);
    pf.string("init", init);
    rethrow_with_field(pf.field("init"), [&] { cfg.model.lpde_init = lpde_init_from_string(init); });
    pf.finish();
  }
  {
    Section s = top.child("ssm");
    std::string slicing = to_string(cfg.model.slicing);
    s.string("slicing", slicing);
    rethrow_with_field(s.field("slicing"), [&] { cfg.model.slicing = ssm_slicing_from_string(slicing); });
    s.finish();
  }
  {
    Section t = top.child("train");
    TrainConfig& tc = cfg.train;
    t.size("batch_size", tc.batch_size);
    t.size("images_per_id", tc.images_per_id);
    t.size("total_steps", tc.total_steps);
    if (t.has("warmup_steps")) {
      std::size_t w = 0;
      t.size("warmup_steps", w);
      tc.warmup_steps = w;
    }
    t.number("base_lr", tc.base_lr);
    t.number("momentum", tc.momentum);
    t.number("weight_decay", tc.weight_decay);
    t.number("margin", tc.margin);
    t.boolean("triplet", tc.triplet);
    t.number("clip_grad_norm", tc.clip_grad_norm);
    t.u64("seed", tc.seed);
    Section a = t.child("augment");
    a.boolean("flip", tc.augment.flip);
    a.boolean("pad_crop", tc.augment.pad_crop);
    a.boolean("erase", tc.augment.erase);
    a.size("padding", tc.augment.padding);
    a.finish();
    t.finish();
  }
  {
    Section d = top.child("data");
    std::string kind = "synthetic";
    d.string("kind", kind);
    if (kind == "synthetic") {
      cfg.data.kind = DataSource::Kind::synthetic;
    } else if (kind == "manifest") {
      cfg.data.kind = DataSource::Kind::manifest;
    } else {
      throw ConfigError(d.field("kind") + ": expected synthetic or manifest");
    }
    d.string("manifest", cfg.data.manifest);
    Section s = d.child("synthetic");
    s.u64("seed", cfg.data.synthetic.seed);
    s.size("ids", cfg.data.synthetic.ids);
    s.size("first_variant", cfg.data.synthetic.first_variant);
    s.size("variants", cfg.data.synthetic.variants);
    s.size("cameras", cfg.data.synthetic.cameras);
    s.finish();
    d.finish();
    if (cfg.data.kind == DataSource::Kind::manifest && cfg.data.manifest.empty()) {
      throw ConfigError(d.field("manifest") + ": required when data.kind is manifest");
    }
  }
  top.finish();

  rethrow_with_field("model", [&] { validate(cfg.model); });
  rethrow_with_field("train", [&] { validate(cfg.train); });
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  RunConfig cfg = parse_config(s.str());
  if (cfg.data.kind == DataSource::Kind::manifest) {
    const std::filesystem::path m(cfg.data.manifest);
    if (m.is_relative()) cfg.data.manifest = (path.parent_path() / m).lexically_normal().string();
  }
  return cfg;
}

std::string to_json(const RunConfig& cfg) {
  const PatchConfig& p = cfg.model.patch;
  json j;
  j["model"] = {{"height", p.height},         {"width", p.width},
                {"channels", p.channels},     {"patch", p.patch},
                {"stride", p.stride},         {"dim", p.dim},
                {"depth", cfg.model.depth},   {"heads", cfg.model.heads},
                {"mlp_ratio", cfg.model.mlp_ratio}, {"init_std", cfg.model.init_std},
                {"num_identities", cfg.model.num_identities}};
  j["modules"] = {{"pfde", cfg.model.modules.pfde}, {"frm", cfg.model.modules.frm}, {"ssm", cfg.model.modules.ssm}};
  j["pfde"] = {{"beta", cfg.model.beta}, {"init", to_string(cfg.model.lpde_init)}};
  j["ssm"] = {{"slicing", to_string(cfg.model.slicing)}};
  const TrainConfig& t = cfg.train;
  j["train"] = {{"batch_size", t.batch_size},
                {"images_per_id", t.images_per_id},
                {"total_steps", t.total_steps},
                {"warmup_steps", t.warmup()},
                {"base_lr", t.base_lr},
                {"momentum", t.momentum},
                {"weight_decay", t.weight_decay},
                {"margin", t.margin},
                {"triplet", t.triplet},
                {"clip_grad_norm", t.clip_grad_norm},
                {"seed", t.seed},
                {"augment",
                 {{"flip", t.augment.flip},
                  {"pad_crop", t.augment.pad_crop},
                  {"erase", t.augment.erase},
                  {"padding", t.augment.padding}}}};
  j["data"] = {{"kind", cfg.data.kind == DataSource::Kind::synthetic ? "synthetic" : "manifest"},
               {"manifest", cfg.data.manifest},
               {"synthetic",
                {{"seed", cfg.data.synthetic.seed},
                 {"ids", cfg.data.synthetic.ids},
                 {"first_variant", cfg.data.synthetic.first_variant},
                 {"variants", cfg.data.synthetic.variants},
                 {"cameras", cfg.data.synthetic.cameras}}}};
  return j.dump(2) + "\n";
}

}  // namespace pft
