// SPDX-License-Identifier: Apache-2.0
// End-to-end acceptance run: one PASS/FAIL line per criterion.
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/metric_oracles.hpp"
#include "support/naive.hpp"
#include "support/perm.hpp"
#include "support/tempdir.hpp"

#include <synctva/cli.hpp>
#include <synctva/errors.hpp>
#include <synctva/fusion.hpp>
#include <synctva/metrics.hpp>
#include <synctva/msde.hpp>
#include <synctva/trainer.hpp>
#include <synctva/xgraph.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace synctva;
using namespace synctva::testing;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradTolNonlinear = 1e-4;
constexpr double kGradTolLinear = 1e-6;
constexpr double kGradBudgetSeconds = 30.0;
constexpr double kOracleTol = 1e-10;
constexpr int kOracleInstances = 100;
constexpr int kPropertyCases = 1000;
constexpr double kStochasticTol = 1e-9;
constexpr double kOverfitTarget = 0.99;
constexpr std::size_t kOverfitEpochs = 200;
constexpr double kOverfitBudgetSeconds = 300.0;
constexpr std::size_t kAblationSeeds = 3;
constexpr int kLabelVectors = 1000;
constexpr double kWf1Tol = 1e-14;
constexpr double kPValueTol = 1e-8;
constexpr double kClosedFormTol = 1e-9;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// ------------------------------------------------------------------ 1

struct GradCase {
  std::string name;
  bool linear;
  std::function<Tensor()> f;
  std::vector<Tensor> inputs;
};

std::vector<GradCase> gradient_cases(Rng &rng) {
  std::vector<GradCase> cs;
  auto r = [&](Shape s, double lo = -2, double hi = 2) { return random_tensor(s, rng, lo, hi); };

  {
    Tensor a = r({3, 4}), b = r({4, 2});
    cs.push_back({"matmul", true, [=] { return matmul(a, b); }, {a, b}});
  }
  {
    Tensor a = r({3, 4});
    cs.push_back({"transpose", true, [=] { return transpose(a); }, {a}});
  }
  {
    Tensor a = r({2, 3}), b = r({2, 3});
    cs.push_back({"add", true, [=] { return add(a, b); }, {a, b}});
    cs.push_back({"sub", true, [=] { return sub(a, b); }, {a, b}});
    cs.push_back({"mul", true, [=] { return mul(a, b); }, {a, b}});
    cs.push_back({"scale", true, [=] { return scale(a, -1.7); }, {a}});
  }
  {
    Tensor x = r({3, 4}), b = r({4});
    cs.push_back({"add_bias", true, [=] { return add_bias(x, b); }, {x, b}});
  }
  {
    Tensor x = r({3, 4});
    cs.push_back({"sigmoid", false, [=] { return elementwise(Pointwise::Sigmoid, x); }, {x}});
    cs.push_back({"tanh", false, [=] { return elementwise(Pointwise::Tanh, x); }, {x}});
    cs.push_back({"softmax_rows", false, [=] { return softmax_rows(x); }, {x}});
  }
  {
    Tensor x = random_away_from_zero({3, 4}, rng);
    cs.push_back({"relu", false, [=] { return elementwise(Pointwise::Relu, x); }, {x}});
  }
  {
    Tensor x = r({4, 5}), g = r({5}, 0.5, 1.5), b = r({5});
    cs.push_back({"layer_norm", false, [=] { return layer_norm(x, g, b); }, {x, g, b}});
  }
  {
    Tensor x = r({5, 3}), k = r({3, 3, 2}), b = r({2});
    cs.push_back({"conv1d_seq", true, [=] { return conv1d_seq(x, k, b); }, {x, k, b}});
  }
  {
    Tensor a = r({2, 3}), b = r({2, 2}), c = r({1, 3});
    cs.push_back({"concat_cols", true, [=] { return concat(a, b, 1); }, {a, b}});
    cs.push_back({"concat_rows", true, [=] { return concat(a, c, 0); }, {a, c}});
  }
  {
    Tensor x = r({4, 5});
    cs.push_back({"slice_rows", true, [=] { return slice_rows(x, 1, 2); }, {x}});
    cs.push_back({"slice_cols", true, [=] { return slice_cols(x, 2, 3); }, {x}});
    cs.push_back({"sum", true, [=] { return sum(x); }, {x}});
    cs.push_back({"mean", true, [=] { return mean(x); }, {x}});
    cs.push_back({"dropout", true,
                  [=] {
                    Rng d(5);
                    return dropout(x, 0.4, d);
                  },
                  {x}});
  }
  {
    Tensor s = r({3, 3});
    cs.push_back({"bipartite_embed", true, [=] { return bipartite_embed(s); }, {s}});
  }
  {
    Tensor a = r({4, 4}, 0.1, 1.0);
    cs.push_back({"normalized_propagator", false, [=] { return normalized_propagator(a); }, {a}});
  }
  {
    Tensor x = r({6, 3});
    cs.push_back({"pair_mean_rows", true, [=] { return pair_mean_rows(x); }, {x}});
  }
  {
    Tensor p = r({3, 4}, 0.1, 1.0);
    cs.push_back({"cross_entropy", false,
                  [=] { return cross_entropy(p, std::vector<int>{0, 3, 1}); },
                  {p}});
  }
  {
    Tensor q = r({3, 4}), kv = r({5, 4}), wq = r({4, 4}, -1, 1), wk = r({4, 4}, -1, 1),
           wv = r({4, 4}, -1, 1);
    cs.push_back({"multi_head_attention", false,
                  [=] { return multi_head_attention(q, kv, wq, wk, wv, 2); },
                  {q, kv, wq, wk, wv}});
  }
  {
    Tensor f1 = r({3, 4}), f2 = r({3, 4}), w = r({4, 4}), b = r({1});
    cs.push_back({"score_edges", true, [=] { return score_edges(f1, f2, {w, b}); },
                  {f1, f2, w, b}});
  }
  {
    Tensor e = r({3, 3});
    cs.push_back({"build_adjacency", false, [=] { return build_adjacency(e); }, {e}});
  }
  {
    Tensor a = build_adjacency(random_tensor({3, 3}, rng, -2, 2, false)).clone_leaf(true);
    Tensor h = r({6, 4}), w = r({4, 3});
    cs.push_back({"gcn_layer", false, [=] { return gcn_layer(a, h, w); }, {a, h, w}});
  }
  {
    const MsdeParams p = MsdeParams::init(5, 8, 2, 16, MsdeVariant::Full, rng);
    Tensor f = r({3, 5}, -1, 1);
    std::vector<Tensor> in = {f};
    ParamList l;
    p.collect(l, "");
    for (auto &np : l)
      in.push_back(np.tensor);
    cs.push_back({"msde_forward", false, [=] { return msde_forward(f, p, {}); }, in});
  }
  {
    BranchParams b;
    b.caf_kernel = r({3, 8, 4}, -1, 1);
    b.caf_bias = r({4}, -1, 1);
    b.w_f = r({4, 4}, -1, 1);
    b.b_f = r({4}, -1, 1);
    b.w_g = r({4, 4}, -1, 1);
    b.b_g = r({4}, -1, 1);
    Tensor q = r({4, 4}), a = r({4, 4});
    cs.push_back({"caf_fuse", false, [=] { return caf_fuse(q, a, b); },
                  {q, a, b.caf_kernel, b.caf_bias, b.w_f, b.b_f, b.w_g, b.b_g}});
  }
  {
    const FusionParams p = FusionParams::init(4, 3, 2, 2, FusionVariant::Full, rng);
    std::array<Tensor, 3> g = {r({6, 4}, -1, 1), r({6, 4}, -1, 1), r({6, 4}, -1, 1)};
    std::vector<Tensor> in(g.begin(), g.end());
    ParamList l;
    p.collect(l, "");
    for (auto &np : l)
      in.push_back(np.tensor);
    cs.push_back({"fuse", false, [=] { return fuse(g, p).z; }, in});
  }
  return cs;
}

Outcome criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  Outcome o;
  std::size_t checked = 0, cases = 0;
  double worst = 0.0;
  std::string worst_name;
  for (const GradCase &c : gradient_cases(rng)) {
    const auto res = gradcheck(c.f, c.inputs);
    checked += res.checked;
    ++cases;
    const double tol = c.linear ? kGradTolLinear : kGradTolNonlinear;
    if (res.max_rel_error > tol) {
      o.pass = false;
      o.detail += c.name + " " + res.worst + " rel " + fmt(res.max_rel_error) + "; ";
    }
    if (res.max_rel_error > worst) {
      worst = res.max_rel_error;
      worst_name = c.name;
    }
  }

  // Whole model: N=3 utterances, d=8, h=2, C=4.
  SynthOptions so;
  so.conversations = 1;
  so.min_utterances = so.max_utterances = 3;
  so.classes = 4;
  so.dims = {6, 5, 4};
  const FeatureSet fs = synth_dataset(so);
  const ModelConfig cfg = tiny_config();
  const SyncTvaModel model(cfg, fs.dims, 4);
  const Conversation &conv = fs.conversations[0];
  std::vector<Tensor> params;
  for (auto &np : model.parameters())
    params.push_back(np.tensor);
  const auto res = gradcheck(
    [&] { return cross_entropy(model.forward(conv, false).probs, conv.labels); }, params);
  checked += res.checked;
  ++cases;
  if (res.max_rel_error > kGradTolNonlinear) {
    o.pass = false;
    o.detail += "model " + res.worst + " rel " + fmt(res.max_rel_error) + "; ";
  }
  const double elapsed = seconds_since(t0);
  if (elapsed >= kGradBudgetSeconds) {
    o.pass = false;
    o.detail += "took " + fmt(elapsed) + " s; ";
  }
  o.detail += std::to_string(cases) + " cases, " + std::to_string(checked) +
              " partials, worst op " + worst_name + " " + fmt(worst) + ", model " +
              fmt(res.max_rel_error) + ", " + fmt(elapsed) + " s";
  return o;
}

// ------------------------------------------------------------------ 2

Outcome criterion_oracles() {
  Rng rng(202);
  double gcn = 0, score = 0, attn = 0, conv = 0;
  for (int i = 0; i < kOracleInstances; ++i) {
    const std::size_t n = 1 + rng.below(4), d = 1 + rng.below(5), dout = 1 + rng.below(5);
    {
      const Tensor a = build_adjacency(random_tensor({n, n}, rng, -3, 3, false));
      const Tensor h = random_tensor({2 * n, d}, rng, -2, 2, false);
      const Tensor w = random_tensor({d, dout}, rng, -2, 2, false);
      gcn = std::max(gcn, max_abs_diff(naive_gcn(Dense(a), Dense(h), Dense(w)), gcn_layer(a, h, w)));
    }
    {
      const Tensor f1 = random_tensor({n, d}, rng, -2, 2, false);
      const Tensor f2 = random_tensor({n, d}, rng, -2, 2, false);
      const EdgeScorerParams p{random_tensor({d, d}, rng, -2, 2, false),
                               random_tensor({1}, rng, -2, 2, false)};
      score = std::max(score, max_abs_diff(naive_score_edges(Dense(f1), Dense(f2), Dense(p.weight),
                                                             p.bias.item()),
                                           score_edges(f1, f2, p)));
    }
    {
      BranchParams p;
      p.w_q = random_tensor({d, d}, rng, -1, 1, false);
      p.w_k = random_tensor({d, d}, rng, -1, 1, false);
      p.w_v = random_tensor({d, d}, rng, -1, 1, false);
      const Tensor q = random_tensor({2 * n, d}, rng, -2, 2, false);
      const Tensor kv = random_tensor({2 * n + 1, d}, rng, -2, 2, false);
      attn = std::max(attn, max_abs_diff(naive_cross_attention(Dense(q), Dense(kv), Dense(p.w_q),
                                                               Dense(p.w_k), Dense(p.w_v)),
                                         cross_attention(q, kv, p)));
    }
    {
      const std::size_t k = 2 * rng.below(3) + 1;
      const Tensor x = random_tensor({2 * n + 1, d}, rng, -2, 2, false);
      const Tensor kernel = random_tensor({k, d, dout}, rng, -1, 1, false);
      const Tensor bias = random_tensor({dout}, rng, -1, 1, false);
      const std::vector<double> kv(kernel.values().begin(), kernel.values().end());
      const std::vector<double> bv(bias.values().begin(), bias.values().end());
      conv = std::max(conv, max_abs_diff(naive_conv1d(Dense(x), kv, k, dout, bv),
                                         conv1d_seq(x, kernel, bias)));
    }
  }
  Outcome o;
  o.pass = gcn <= kOracleTol && score <= kOracleTol && attn <= kOracleTol && conv <= kOracleTol;
  o.detail = std::to_string(kOracleInstances) + " instances each; max abs diff gcn " + fmt(gcn) +
             ", score_edges " + fmt(score) + ", cross_attention " + fmt(attn) + ", conv1d " +
             fmt(conv);
  return o;
}

// ------------------------------------------------------------------ 3

Outcome criterion_invariants() {
  Rng rng(303);
  std::size_t bad_adj = 0, bad_softmax = 0, bad_caf = 0, bad_perm = 0;
  const MsdeVariant variants[] = {MsdeVariant::Full, MsdeVariant::Removed,
                                  MsdeVariant::GatingOnly, MsdeVariant::AttentionOnly};
  for (int i = 0; i < kPropertyCases; ++i) {
    const std::size_t n = 1 + rng.below(7);
    {
      const Tensor a = build_adjacency(random_tensor({n, n}, rng, -6, 6, false));
      for (std::size_t r = 0; r < 2 * n; ++r)
        for (std::size_t c = 0; c < 2 * n; ++c)
          if (a.at(r, c) != a.at(c, r) || ((r < n) == (c < n) && a.at(r, c) != 0.0) ||
              ((r < n) != (c < n) && !(a.at(r, c) > 0.0)))
            ++bad_adj;
    }
    {
      const std::size_t cols = 1 + rng.below(8);
      const double spread = i % 4 == 0 ? 500.0 : 5.0;
      const Tensor s = softmax_rows(random_tensor({n, cols}, rng, -spread, spread, false));
      for (std::size_t r = 0; r < n; ++r) {
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          total += s.at(r, c);
          if (s.at(r, c) < 0.0)
            ++bad_softmax;
        }
        if (std::abs(total - 1.0) > kStochasticTol)
          ++bad_softmax;
      }
    }
    {
      // Freshly initialized branch parameters on inputs of unit scale.
      const std::size_t d = 2 + rng.below(6);
      Rng init = rng.split(static_cast<std::uint64_t>(i));
      const FusionParams fp = FusionParams::init(d, 3, 1, 1, FusionVariant::Full, init);
      const Tensor out = caf_fuse(random_tensor({2 * n, d}, rng, -3, 3, false),
                                  random_tensor({2 * n, d}, rng, -3, 3, false), fp.rounds[0][0]);
      for (double v : out.values())
        if (!(v > -1.0 && v < 1.0))
          ++bad_caf;
    }
    {
      const MsdeVariant v = variants[i % 4];
      Rng init = rng.split(static_cast<std::uint64_t>(i) + 7919);
      const MsdeParams p = MsdeParams::init(5, 8, 2, 16, v, init);
      const std::size_t m = 2 + rng.below(7);
      const Tensor f = random_tensor({m, 5}, rng, -1, 1, false);
      const auto perm = random_permutation(m, rng);
      if (max_abs_diff(permute_rows(msde_forward(f, p, {}), perm),
                       msde_forward(permute_rows(f, perm), p, {})) > 1e-12)
        ++bad_perm;
    }
  }
  Outcome o;
  o.pass = bad_adj + bad_softmax + bad_caf + bad_perm == 0;
  o.detail = std::to_string(kPropertyCases) + " cases per property; violations adjacency " +
             std::to_string(bad_adj) + ", softmax " + std::to_string(bad_softmax) + ", caf range " +
             std::to_string(bad_caf) + ", msde equivariance " + std::to_string(bad_perm);
  return o;
}

// ------------------------------------------------------------------ 4

Outcome criterion_overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  SynthOptions so; // seed 7, C=6, 60 conversations, spread 0.05
  const FeatureSet fs = synth_dataset(so);
  ModelConfig cfg; // full model, default optimizer settings
  cfg.seed = 7;
  cfg.epochs = kOverfitEpochs;
  cfg.train_on_all = true;
  cfg.target_train_accuracy = kOverfitTarget;
  const DatasetSplit s = partition(fs, cfg);
  Trainer tr(cfg, fs.dims, fs.class_names);
  tr.fit(s.train, s.valid);
  const Evaluation e = evaluate(tr.model(), s.train);
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = e.report.accuracy >= kOverfitTarget && e.report.weighted_f1 >= kOverfitTarget &&
           tr.epoch() <= kOverfitEpochs && elapsed < kOverfitBudgetSeconds;
  o.detail = "train acc " + fmt(e.report.accuracy) + ", WF1 " + fmt(e.report.weighted_f1) +
             " after " + std::to_string(tr.epoch()) + " epochs, " + fmt(elapsed) + " s";
  return o;
}

// ------------------------------------------------------------------ 5

Outcome criterion_ablation() {
  const auto t0 = std::chrono::steady_clock::now();
  const FeatureSet fs = tiny_data(20, 4);
  const DatasetSplit s = split(fs, {0.6, 0.2, 0.2}, 7);
  ModelConfig cfg = tiny_config();
  cfg.epochs = 3;
  std::vector<std::string> tags;
  for (const AblationSpec &a : ablation_catalog())
    tags.push_back(a.tag);
  AblationOptions opt;
  opt.seeds = kAblationSeeds;
  const auto rows = run_ablation_grid(s, cfg, tags, opt);

  Outcome o;
  std::string problems;
  if (rows.size() != tags.size() || rows.front().tag != "full")
    problems += "row set; ";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const AblationRow &r = rows[i];
    if (r.tag != tags[i])
      problems += "order at " + r.tag + "; ";
    if (r.wf1.size() != kAblationSeeds || r.acc.size() != kAblationSeeds || !r.ttest)
      problems += r.tag + " per-seed results; ";
    if (std::abs(r.delta_wf1 - (r.mean_wf1 - rows[0].mean_wf1)) > 1e-12 ||
        std::abs(r.delta_acc - (r.mean_acc - rows[0].mean_acc)) > 1e-12)
      problems += r.tag + " delta; ";
    if (r.parameters > rows[0].parameters)
      problems += r.tag + " census " + std::to_string(r.parameters) + " > full; ";
  }
  TempDir dir("acceptance_grid");
  write_ablation_csv(dir / "ablation.csv", rows);
  std::ifstream in(dir / "ablation.csv");
  std::string header, line;
  std::getline(in, header);
  std::size_t lines = 0;
  while (std::getline(in, line))
    ++lines;
  if (header.rfind("variant,description,parameters,wf1,acc,delta_wf1,delta_acc", 0) != 0 ||
      lines != tags.size())
    problems += "csv shape; ";
  o.pass = problems.empty();
  std::string census;
  for (const auto &r : rows)
    census += r.tag + "=" + std::to_string(r.parameters) + " ";
  o.detail = problems + std::to_string(rows.size()) + " variants x " +
             std::to_string(kAblationSeeds) + " seeds in " + fmt(seconds_since(t0)) +
             " s; census " + census;
  return o;
}

// ------------------------------------------------------------------ 6

Outcome criterion_metrics() {
  Rng rng(606);
  std::size_t confusion_bad = 0, wf1_bad = 0, p_bad = 0;
  double worst_p = 0.0;
  for (int i = 0; i < kLabelVectors; ++i) {
    const std::size_t classes = 2 + rng.below(8), n = 1 + rng.below(80);
    std::vector<int> t(n), p(n);
    for (std::size_t k = 0; k < n; ++k) {
      t[k] = static_cast<int>(rng.below(classes));
      p[k] = rng.uniform() < 0.5 ? t[k] : static_cast<int>(rng.below(classes));
    }
    const ConfusionMatrix cm = confusion_matrix(t, p, classes);
    const auto want = tally_confusion(t, p, classes);
    for (std::size_t a = 0; a < classes; ++a)
      for (std::size_t b = 0; b < classes; ++b)
        confusion_bad += cm.at(a, b) != want[a][b];
    wf1_bad += std::abs(weighted_f1(cm) - tally_weighted_f1(t, p, classes)) > kWf1Tol;

    const std::size_t m = 2 + rng.below(9);
    std::vector<double> xa(m), xb(m);
    const double shift = rng.uniform(-0.5, 0.5);
    for (std::size_t k = 0; k < m; ++k) {
      xa[k] = rng.uniform(0, 1);
      xb[k] = xa[k] + shift + 0.2 * rng.normal();
    }
    const double err = std::abs(paired_t_test(xa, xb).p - hp_paired_p(xa, xb));
    worst_p = std::max(worst_p, err);
    p_bad += err > kPValueTol;
  }
  const std::vector<double> five = {1.1, 0.9, 1.0, 1.2, 0.8}, zeros(5, 0.0);
  const double five_err = std::abs(paired_t_test(five, zeros).p - hp_paired_p(five, zeros));
  const std::vector<int> y = {0, 2, 1, 1, 0, 2};
  const bool trivial = weighted_f1(y, y, 3) == 1.0 && paired_t_test(five, five).p == 1.0 &&
                       paired_t_test(std::vector<double>{1, 0}, std::vector<double>{0, 1}).p == 1.0;
  Outcome o;
  o.pass = confusion_bad == 0 && wf1_bad == 0 && p_bad == 0 && five_err <= kPValueTol && trivial;
  o.detail = std::to_string(kLabelVectors) + " label vectors: confusion mismatches " +
             std::to_string(confusion_bad) + ", WF1 mismatches " + std::to_string(wf1_bad) +
             "; p-value max error " + fmt(worst_p) + ", five-pair example " + fmt(five_err) +
             "; trivial cases " + (trivial ? "exact" : "WRONG");
  return o;
}

// ------------------------------------------------------------------ 7

int quiet_cli(const std::vector<std::string> &args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != kExitOk)
    std::cerr << err.str();
  return code;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Relative path -> bytes for every file under `root`.
std::map<std::string, std::string> snapshot(const fs::path &root) {
  std::map<std::string, std::string> files;
  for (const auto &e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file())
      files[fs::relative(e.path(), root).string()] = slurp(e.path());
  return files;
}

Outcome criterion_reproducibility() {
  TempDir dir("acceptance_repro");
  Outcome o;
  const std::string data = (dir / "data").string();
  if (quiet_cli({"synth", "--out", data, "--conversations", "20"}) != kExitOk)
    return {false, "synth failed"};
  auto train = [&](const std::string &out, std::vector<std::string> extra) {
    std::vector<std::string> args = {"train", "--data", data,   "--out", (dir / out).string(),
                                     "--epochs", "4", "--d", "16", "--d-ff", "32",
                                     "--quiet"};
    args.insert(args.end(), extra.begin(), extra.end());
    return quiet_cli(args);
  };
  if (train("a", {}) != kExitOk || train("b", {}) != kExitOk ||
      train("c", {"--stop-after", "2"}) != kExitOk ||
      train("c", {"--resume", (dir / "c/checkpoint").string()}) != kExitOk)
    return {false, "a train run failed"};
  const auto a = snapshot(dir / "a/checkpoint"), b = snapshot(dir / "b/checkpoint"),
             c = snapshot(dir / "c/checkpoint");
  const std::string la = slurp(dir / "a/train_log.csv"), lb = slurp(dir / "b/train_log.csv"),
                    lc = slurp(dir / "c/train_log.csv");
  const bool twin = a == b && la == lb;
  const bool resume = a == c && la == lc;
  o.pass = twin && !a.empty() && resume;
  o.detail = std::to_string(a.size()) + " checkpoint files; identical runs " +
             (twin ? "bit-identical" : "DIFFER") + "; resume after epoch 2 " +
             (resume ? "bit-identical" : "DIFFERS");
  return o;
}

// ------------------------------------------------------------------ 8

Outcome criterion_equations() {
  // Single edge between the two nodes of a one-utterance graph: D̃ = diag(2,2)
  // so every propagator entry is 1/2 and each output row is the pair mean.
  const Tensor out = gcn_layer(Tensor::matrix({{0, 1}, {1, 0}}), Tensor::matrix({{1, 2}, {3, 4}}),
                               Tensor::identity(2));
  double gcn_err = 0.0;
  const double want[] = {2, 3, 2, 3};
  for (std::size_t i = 0; i < 4; ++i)
    gcn_err = std::max(gcn_err, std::abs(out.at(i) - want[i]));

  BranchParams b;
  b.caf_kernel = Tensor::zeros({3, 8, 4});
  b.caf_bias = Tensor::zeros({4});
  Rng rng(808);
  b.w_f = random_tensor({4, 4}, rng, -1, 1, false);
  b.w_g = random_tensor({4, 4}, rng, -1, 1, false);
  b.b_f = Tensor::zeros({4});
  b.b_g = Tensor::zeros({4});
  double caf_err = 0.0;
  const Tensor caf = caf_fuse(random_tensor({6, 4}, rng, -2, 2, false),
                              random_tensor({6, 4}, rng, -2, 2, false), b);
  for (double v : caf.values())
    caf_err = std::max(caf_err, std::abs(v));

  double ce_err = 0.0;
  for (std::size_t c = 2; c <= 10; ++c) {
    const Tensor uniform = Tensor::full({5, c}, 1.0 / static_cast<double>(c));
    const std::vector<int> labels = {0, 1, 0, 1, 0};
    ce_err = std::max(ce_err, std::abs(cross_entropy(uniform, labels).item() -
                                       std::log(static_cast<double>(c))));
  }
  Outcome o;
  o.pass = gcn_err <= kClosedFormTol && caf_err <= kClosedFormTol && ce_err <= kClosedFormTol;
  o.detail = "2-node GCN err " + fmt(gcn_err) + ", zero-signal CAF err " + fmt(caf_err) +
             ", uniform CE vs ln C err " + fmt(ce_err);
  return o;
}

} // namespace

int main() {
  const std::vector<std::pair<const char *, std::function<Outcome()>>> criteria = {
    {"gradient suite", criterion_gradients},
    {"oracle equivalence", criterion_oracles},
    {"structural invariants", criterion_invariants},
    {"overfit certification", criterion_overfit},
    {"ablation harness", criterion_ablation},
    {"metrics oracles", criterion_metrics},
    {"reproducibility", criterion_reproducibility},
    {"closed-form spot checks", criterion_equations},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception &e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << ' ' << (i + 1) << ' ' << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
