// Desk-scale acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero when any selected criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "op_cases.hpp"
#include "oracles.hpp"
#include "pft/checkpoint.hpp"
#include "pft/config.hpp"
#include "pft/evaluation.hpp"
#include "pft/frm.hpp"
#include "pft/grad_check.hpp"
#include "pft/model.hpp"
#include "pft/retrieval.hpp"
#include "pft/ssm.hpp"
#include "pft/trainer.hpp"

namespace {

using pft::PatchSequence;
using pft::Tensor;
using pft::ad::Tape;
using pft::ad::Var;
namespace ad = pft::ad;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (pass) detail.clear();
    pass = false;
    detail += (detail.empty() ? "" : "; ") + what;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

pft::RunConfig desk_config() { return pft::load_config(PFT_SOURCE_DIR "/configs/desk.json"); }

struct DeskSet {
  pft::RunConfig config;
  std::vector<pft::DatasetRecord> data;
};

DeskSet desk_set() {
  DeskSet s{desk_config(), {}};
  s.data = pft::generate_dataset(s.config.data.synthetic, s.config.image_size());
  s.config.model.num_identities = pft::count_identities(s.data);
  return s;
}

// Mean of the last ten logged losses below half the mean of the first ten.
struct LossDrop {
  double initial = 0.0, final = 0.0;
  bool halved() const { return final < 0.5 * initial; }
};

LossDrop loss_drop(const std::vector<pft::StepLog>& log) {
  LossDrop d;
  const std::size_t w = std::min<std::size_t>(10, log.size());
  for (std::size_t i = 0; i < w; ++i) {
    d.initial += log[i].loss / static_cast<double>(w);
    d.final += log[log.size() - w + i].loss / static_cast<double>(w);
  }
  return d;
}

bool finite_log(const std::vector<pft::StepLog>& log) {
  return std::all_of(log.begin(), log.end(), [](const pft::StepLog& s) { return std::isfinite(s.loss); });
}

struct TrainedDesk {
  std::string checkpoint;
  pft::RetrievalReport report;
  LossDrop drop;
  bool finite = false;
  double occluder_mass = 0.0;
};

TrainedDesk train_desk() {
  DeskSet s = desk_set();
  pft::PftModel model(s.config.model, s.config.train.seed);
  const auto result = pft::train(model, s.config.train, s.data);
  TrainedDesk t;
  t.checkpoint = pft::encode_checkpoint(pft::snapshot(model));
  t.drop = loss_drop(result.log);
  t.finite = finite_log(result.log);

  // held-in retrieval: variants 0-3 query the remaining twelve
  std::vector<pft::DatasetRecord> query, gallery;
  const std::size_t variants = s.config.data.synthetic.variants;
  for (std::size_t i = 0; i < s.data.size(); ++i) (i % variants < 4 ? query : gallery).push_back(s.data[i]);
  t.report = pft::evaluate_model(model, query, gallery);

  std::size_t occluded = 0;
  const auto& p = s.config.model.patch;
  for (const auto& r : gallery) {
    if (!r.occluder) continue;
    Tape tape(Tape::Mode::inference);
    const auto fwd = model.forward(tape, r.image);
    const Tensor heat = pft::attention_rollout(fwd.attention, model.grid());
    const auto& o = *r.occluder;
    double inside = 0.0, total = 0.0;
    for (std::size_t gy = 0; gy < model.grid().rows; ++gy)
      for (std::size_t gx = 0; gx < model.grid().cols; ++gx) {
        const std::size_t x0 = gx * p.stride, y0 = gy * p.stride;
        const bool overlaps = x0 < o.x + o.width && o.x < x0 + p.patch && y0 < o.y + o.height && o.y < y0 + p.patch;
        total += heat.at(gy, gx);
        if (overlaps) inside += heat.at(gy, gx);
      }
    if (total > 0.0) t.occluder_mass += inside / total;
    ++occluded;
  }
  if (occluded > 0) t.occluder_mass /= static_cast<double>(occluded);
  return t;
}

struct Context {
  std::optional<TrainedDesk> desk;
  const TrainedDesk& trained() {
    if (!desk) desk = train_desk();
    return *desk;
  }
};

Outcome frm_oracle(Context&) {
  Outcome o;
  std::mt19937_64 rng(1001);
  std::size_t checked = 0;
  for (std::size_t n : {4u, 8u, 12u, 48u, 72u}) {
    for (int trial = 0; trial < 20; ++trial) {
      const Tensor z = opcases::random_tensor({n, 64}, rng);
      const Tensor cls = opcases::random_tensor({1, 64}, rng);
      Tape t;
      const auto out = pft::frm_apply(PatchSequence{t.constant(z), t.constant(cls)});
      o.require(out.tokens.value().bitwise_equal(oracle::frm(z)), "N=" + std::to_string(n) + " differs from oracle");
      o.require(out.class_token->value().bitwise_equal(cls), "class token altered at N=" + std::to_string(n));
      ++checked;
    }
  }
  if (o.pass) o.detail = std::to_string(checked) + " sequences bitwise equal to the index oracle";
  return o;
}

std::vector<std::vector<double>> sorted_rows(const Tensor& t) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < t.rows(); ++i) rows.emplace_back(t.data().begin() + i * t.cols(), t.data().begin() + (i + 1) * t.cols());
  std::sort(rows.begin(), rows.end());
  return rows;
}

Outcome ssm_oracle(Context&) {
  Outcome o;
  std::mt19937_64 rng(1002);
  std::size_t checked = 0;
  for (std::size_t n : {12u, 24u, 72u}) {
    const auto slices = pft::ssm_slice(n);
    const std::string tag = "N=" + std::to_string(n);
    for (std::size_t g = 0; g < 12; ++g) {
      std::vector<std::size_t> expect;
      for (std::size_t r = g * n / 12; r < (g + 1) * n / 12; ++r) expect.push_back(r);
      o.require(slices.slices[g] == expect, tag + " slice " + std::to_string(g + 1) + " boundaries");
    }
    for (int trial = 0; trial < 20; ++trial) {
      const Tensor z = opcases::random_tensor({n, 64}, rng);
      const Tensor cls = opcases::random_tensor({1, 64}, rng);
      Tape t;
      const auto b = pft::ssm_group(t.constant(z), slices);
      o.require(b.left.value().bitwise_equal(oracle::ssm_branch(z, 0)), tag + " left branch");
      o.require(b.middle.value().bitwise_equal(oracle::ssm_branch(z, 1)), tag + " middle branch");
      o.require(b.right.value().bitwise_equal(oracle::ssm_branch(z, 2)), tag + " right branch");
      const Tensor all = ad::concat(std::vector<Var>{b.left, b.middle, b.right}, 0).value();
      o.require(sorted_rows(all) == sorted_rows(z), tag + " branches are not a permutation of the input");
      const auto glf = pft::ssm_fuse(t.constant(z), slices, t.constant(cls));
      o.require(glf.tokens.value().bitwise_equal(oracle::ssm_glf_tokens(z)), tag + " GLF tokens");
      o.require(glf.class_token->value().bitwise_equal(cls), tag + " GLF class token");
      ++checked;
    }
  }
  if (o.pass) o.detail = std::to_string(checked) + " sequences: slices, branches and GLF match enumeration";
  return o;
}

Outcome pfde_identity(Context&) {
  Outcome o;
  pft::RunConfig on = desk_config();
  on.model.modules = {true, true, true};
  on.model.beta = 1.0;
  on.model.lpde_init = pft::LpdeInit::constant;
  pft::RunConfig off = on;
  off.model.modules.pfde = false;
  pft::PftModel a(on.model, on.train.seed), b(off.model, off.train.seed);
  const auto images = pft::generate_dataset({0, 2, 0, 1, 2}, on.image_size());
  Tape ta(Tape::Mode::inference), tb(Tape::Mode::inference);
  std::vector<std::vector<Var>> rows_a(a.head_count()), rows_b(b.head_count());
  for (const auto& r : images) {
    const auto x = a.forward(ta, r.image);
    const auto y = b.forward(tb, r.image);
    const auto xf = x.features(), yf = y.features();
    o.require(xf.size() == yf.size(), "head counts differ");
    for (std::size_t h = 0; h < xf.size() && h < yf.size(); ++h) {
      o.require(xf[h].value().bitwise_equal(yf[h].value()), "head " + std::to_string(h) + " features differ");
      rows_a[h].push_back(xf[h]);
      rows_b[h].push_back(yf[h]);
    }
    o.require(x.global_tokens.value().bitwise_equal(y.global_tokens.value()), "global tokens differ");
    for (std::size_t l = 0; l < x.attention.size(); ++l)
      o.require(x.attention[l].bitwise_equal(y.attention[l]), "attention map " + std::to_string(l) + " differs");
    o.require(a.embed(r.image).bitwise_equal(b.embed(r.image)), "embedding differs");
  }
  for (std::size_t h = 0; h < a.head_count(); ++h) {
    const Tensor la = a.logits(ta, h, ad::concat(rows_a[h], 0)).value();
    const Tensor lb = b.logits(tb, h, ad::concat(rows_b[h], 0)).value();
    o.require(la.bitwise_equal(lb), "head " + std::to_string(h) + " logits differ");
  }
  o.require(a.parameter_count() == b.parameter_count() + 72 * 64, "LPDE is not 72 x 64");
  if (o.pass) o.detail = "features, tokens, attention, embeddings and logits bitwise equal (beta 1, N=72, D=64)";
  return o;
}

Outcome gradient_suite(Context&) {
  Outcome o;
  double worst_op = 0.0;
  std::string worst_name;
  std::size_t ops = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (auto& c : opcases::all_op_cases(seed)) {
      const auto r = ad::grad_check_detailed(c.fn, c.input, 1e-5);
      if (r.max_rel_error > worst_op) worst_op = r.max_rel_error, worst_name = c.name;
      o.require(r.max_rel_error < 1e-4, c.name + " seed " + std::to_string(seed) + " rel error " + fmt("%.3g", r.max_rel_error));
      ++ops;
    }
  }

  DeskSet s = desk_set();
  pft::PftModel model(s.config.model, s.config.train.seed);
  const auto params = model.parameters();
  auto full = [&](std::vector<std::size_t> ids, std::vector<std::size_t> variants, bool triplet) {
    std::vector<Tensor> images;
    for (std::size_t i = 0; i < ids.size(); ++i)
      images.push_back(pft::generate_identity(0, ids[i], variants[i], variants[i] % 2, s.config.image_size()).image);
    std::vector<const Tensor*> ptrs;
    for (const auto& im : images) ptrs.push_back(&im);
    auto loss = [&](Tape& t) { return pft::batch_loss(t, model, ptrs, ids, s.config.train.margin, triplet); };
    return ad::grad_check_params(loss, params, 1e-5, 3, 23);
  };
  // two images of different identities: the triplet term has no positive pair, so CE only
  const auto two = full({0, 1}, {0, 1}, false);
  o.require(two.max_rel_error < 1e-3, "full loss (2 images) rel error " + fmt("%.3g", two.max_rel_error));
  const auto four = full({0, 0, 1, 1}, {0, 1, 0, 1}, true);
  o.require(four.max_rel_error < 1e-3, "full loss with triplet (4 images) rel error " + fmt("%.3g", four.max_rel_error));
  if (o.pass) {
    o.detail = std::to_string(ops) + " op checks, worst " + fmt("%.2e", worst_op) + " (" + worst_name +
               "); full loss 2 images " + fmt("%.2e", two.max_rel_error) + " over " + std::to_string(two.checked) +
               " entries; 4 images with triplet " + fmt("%.2e", four.max_rel_error);
  }
  return o;
}

Outcome metrics_oracle(Context&) {
  Outcome o;
  {
    const Tensor dist = Tensor::from_rows({{0.1, 0.2, 0.3, 0.4}});
    const std::vector<std::size_t> qid{7}, gid{7, 1, 7, 2}, qcam{0}, gcam{1, 1, 1, 1};
    const auto r = pft::evaluate(dist, qid, gid, qcam, gcam, {4, true});
    o.require(std::abs(r.map - 5.0 / 6.0) < 1e-15, "hand case AP " + fmt("%.17g", r.map) + " != 5/6");
  }
  std::mt19937_64 rng(1005);
  std::uniform_int_distribution<std::size_t> size(1, 20), ids(0, 4), cams(0, 2), level(0, 7);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t q = size(rng), g = size(rng);
    Tensor dist = opcases::random_tensor({q, g}, rng, 0.0, 2.0);
    if (trial % 2) for (double& v : dist.data()) v = static_cast<double>(level(rng)) / 8.0;
    std::vector<std::size_t> qid, gid, qcam, gcam;
    for (std::size_t i = 0; i < q; ++i) qid.push_back(ids(rng)), qcam.push_back(cams(rng));
    for (std::size_t j = 0; j < g; ++j) gid.push_back(ids(rng)), gcam.push_back(cams(rng));
    const auto got = pft::evaluate(dist, qid, gid, qcam, gcam, {20, true});
    const auto want = oracle::retrieval(dist, qid, gid, qcam, gcam, 20, true);
    mismatches += !(got.cmc == want.cmc && got.map == want.map && got.excluded_queries == want.excluded);
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " of 200 instances differ from brute force");
  if (o.pass) o.detail = "200 random instances exact; AP 5/6 hand case";
  return o;
}

Outcome overfit(Context& ctx) {
  Outcome o;
  const TrainedDesk& t = ctx.trained();
  const double r1 = t.report.cmc.at(0);
  o.detail = "rank-1 " + fmt("%.4f", r1) + " mAP " + fmt("%.4f", t.report.map) + ", loss " + fmt("%.3f", t.drop.initial) +
             " -> " + fmt("%.3f", t.drop.final) + ", mean occluder heat fraction " + fmt("%.3f", t.occluder_mass);
  const std::string base = o.detail;
  o.require(t.finite, "non-finite loss");
  o.require(r1 >= 0.95, "rank-1 below 0.95");
  o.require(t.report.map >= 0.80, "mAP below 0.80");
  if (!o.pass) o.detail = base + ": " + o.detail;
  return o;
}

Outcome ablation(Context&) {
  Outcome o;
  const std::vector<std::string> rows{"", "pfde", "pfde,frm", "frm,ssm", "pfde,ssm", "pfde,frm,ssm"};
  DeskSet s = desk_set();
  s.config.train.total_steps = 50;
  std::map<std::string, std::size_t> counts;
  std::map<std::string, pft::ModuleSwitches> switches;
  std::set<std::string> topologies;
  std::ostringstream summary;
  for (const auto& row : rows) {
    pft::RunConfig c = s.config;
    c.model.modules = pft::parse_ablation(row);
    const std::string label = c.model.modules.label();
    try {
      pft::PftModel model(c.model, c.train.seed);
      const auto log = pft::train(model, c.train, s.data).log;
      o.require(log.size() == 50 && finite_log(log), label + " did not finish 50 finite steps");
      counts[label] = model.parameter_count();
      switches[label] = c.model.modules;
      topologies.insert(model.topology());
      summary << (summary.tellp() ? " " : "") << label << "=" << counts[label];
    } catch (const std::exception& e) {
      o.require(false, label + ": " + e.what());
    }
  }
  o.require(topologies.size() == rows.size(), "topologies are not all distinct");
  // FRM has no parameters; PFDE and SSM each add some
  for (const auto& [a, ma] : switches)
    for (const auto& [b, mb] : switches) {
      if (a >= b) continue;
      const bool parametric_differs = ma.pfde != mb.pfde || ma.ssm != mb.ssm;
      o.require((counts[a] != counts[b]) == parametric_differs, a + " vs " + b + " parameter counts");
    }
  if (o.pass) o.detail = "50 steps each, parameters " + summary.str();
  return o;
}

Outcome beta_sweep(Context&) {
  Outcome o;
  std::ostringstream summary;
  for (double beta : {0.95, 1.0, 1.05}) {
    DeskSet s = desk_set();
    s.config.model.beta = beta;
    pft::PftModel model(s.config.model, s.config.train.seed);
    const auto log = pft::train(model, s.config.train, s.data).log;
    const LossDrop d = loss_drop(log);
    std::vector<pft::DatasetRecord> query, gallery;
    for (std::size_t i = 0; i < s.data.size(); ++i) (i % 16 < 4 ? query : gallery).push_back(s.data[i]);
    const auto report = pft::evaluate_model(model, query, gallery);
    summary << (summary.tellp() ? "; " : "") << "beta " << beta << ": loss " << fmt("%.3f", d.initial) << " -> "
            << fmt("%.3f", d.final) << " rank-1 " << fmt("%.3f", report.cmc[0]) << " mAP " << fmt("%.3f", report.map);
    o.require(finite_log(log) && d.halved(), "beta " + fmt("%.2f", beta) + " final loss not below half the initial");
  }
  o.detail = summary.str() + (o.pass ? "" : ": " + o.detail);
  return o;
}

Outcome determinism(Context& ctx) {
  Outcome o;
  const std::string first = ctx.trained().checkpoint;
  const std::string second = train_desk().checkpoint;
  o.require(first == second, "checkpoints differ");
  if (o.pass) o.detail = "repeat run checkpoint bitwise identical (" + std::to_string(first.size()) + " bytes)";
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;  // 0 = unbounded
  std::function<Outcome(Context&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-9"};
  std::vector<int> selected;
  app.add_option("--criterion", selected, "Run only these criteria (repeatable)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all{
      {1, "FRM oracle equivalence", 5, frm_oracle},
      {2, "SSM oracle equivalence", 5, ssm_oracle},
      {3, "PFDE identity at beta 1", 10, pfde_identity},
      {4, "gradient suite", 300, gradient_suite},
      {5, "retrieval metrics oracle", 10, metrics_oracle},
      {6, "overfit sanity", 900, overfit},
      {7, "ablation topologies", 600, ablation},
      {8, "beta sweep", 0, beta_sweep},
      {9, "determinism", 0, determinism},
  };
  Context ctx;
  bool ok = true;
  for (const auto& c : all) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run(ctx);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && secs > c.budget_seconds) {
      out.pass = false;
      out.detail += " (over the " + fmt("%.0f", c.budget_seconds) + " s budget)";
    }
    std::printf("%s criterion %d %s: %s [%.1f s]\n", out.pass ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str(), secs);
    std::fflush(stdout);
    ok = ok && out.pass;
  }
  return ok ? 0 : 1;
}
