// Copyright 2026 The ctxnet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Acceptance runner: prints one PASS/FAIL line per criterion AC-1..AC-9 and
// exits nonzero when any criterion fails.
//
//   ctxn_acceptance [--work DIR] [--quick]
//
// --quick skips the training experiments behind AC-5, AC-6 and AC-7.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ctxn/augment.hpp"
#include "ctxn/gradcheck.hpp"
#include "ctxn/ops.hpp"
#include "ctxn/train.hpp"

namespace fs = std::filesystem;
using namespace ctxn;

namespace {

int failures = 0;

void verdict(const char* id, bool pass, const std::string& detail) {
  std::printf("%s %s: %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1, double hi = 1, bool grad = false) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = uniform(rng, lo, hi);
  return Tensor<double>::from(std::move(shape), std::move(v), grad);
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint64_t file_hash(const fs::path& p) { return text::fnv1a64(read_bytes(p)); }

// Hash over every regular file under `dir`, in path order.
std::uint64_t tree_hash(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += fs::relative(f, dir).string() + '\0' + read_bytes(f);
  return text::fnv1a64(all);
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(CTXN_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// AC-1 -----------------------------------------------------------------------

void ac1() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  struct Case {
    const char* name;
    std::function<double()> run;
  };
  auto check = [](auto fn, std::vector<NamedTensor<double>> params) {
    return finite_diff_check(fn, std::move(params), 1e-5).max_rel_error();
  };
  // A fixed random projection turns every output into a scalar loss with
  // nonzero upstream gradients everywhere.
  auto project = [&rng](const Tensor<double>& y) {
    auto w = Tensor<double>::from(y.shape(), std::vector<double>(y.numel()));
    for (auto& v : w.data()) v = uniform(rng, -1, 1);
    return w;
  };
  std::vector<Case> cases;
  cases.push_back({"conv2d", [&] {
                     auto x = random_tensor({1, 2, 6, 6}, rng, -1, 1, true);
                     auto w = random_tensor({3, 2, 3, 3}, rng, -1, 1, true);
                     auto b = random_tensor({3}, rng, -1, 1, true);
                     auto p = project(conv2d(x, w, b, 1, 1));
                     return check([&] { return sum(mul(conv2d(x, w, b, 1, 1), p)); }, {{"x", x}, {"w", w}, {"b", b}});
                   }});
  cases.push_back({"conv2d stride 2", [&] {
                     auto x = random_tensor({2, 2, 7, 7}, rng, -1, 1, true);
                     auto w = random_tensor({2, 2, 3, 3}, rng, -1, 1, true);
                     auto b = random_tensor({2}, rng, -1, 1, true);
                     auto p = project(conv2d(x, w, b, 2, 0));
                     return check([&] { return sum(mul(conv2d(x, w, b, 2, 0), p)); }, {{"x", x}, {"w", w}, {"b", b}});
                   }});
  cases.push_back({"maxpool2", [&] {
                     // Distinct values keep every window away from a tie.
                     std::vector<double> v(2 * 2 * 4 * 4);
                     std::iota(v.begin(), v.end(), 0.0);
                     std::shuffle(v.begin(), v.end(), rng);
                     for (auto& x : v) x *= 0.1;
                     auto x = Tensor<double>::from({2, 2, 4, 4}, v, true);
                     auto p = project(maxpool2(x));
                     return check([&] { return sum(mul(maxpool2(x), p)); }, {{"x", x}});
                   }});
  cases.push_back({"upconv2", [&] {
                     auto x = random_tensor({1, 3, 3, 3}, rng, -1, 1, true);
                     auto w = random_tensor({3, 2, 2, 2}, rng, -1, 1, true);
                     auto b = random_tensor({2}, rng, -1, 1, true);
                     auto p = project(upconv2(x, w, b));
                     return check([&] { return sum(mul(upconv2(x, w, b), p)); }, {{"x", x}, {"w", w}, {"b", b}});
                   }});
  cases.push_back({"batchnorm2d", [&] {
                     auto x = random_tensor({2, 2, 3, 3}, rng, -1, 1, true);
                     auto g = random_tensor({2}, rng, 0.5, 1.5, true);
                     auto b = random_tensor({2}, rng, -1, 1, true);
                     auto state = BatchNormState<double>::create(2);
                     auto p = project(x);
                     return check([&] { return sum(mul(batchnorm2d(x, g, b, state, Mode::train), p)); },
                                  {{"x", x}, {"gamma", g}, {"beta", b}});
                   }});
  for (auto [name, kind] : {std::pair{"relu", Activation::relu}, std::pair{"tanh", Activation::tanh},
                            std::pair{"sigmoid", Activation::sigmoid}}) {
    cases.push_back({name, [&, kind] {
                       auto x = random_tensor({3, 4}, rng, -2, 2, true);
                       // Keep ReLU inputs off the kink.
                       for (auto& v : x.data()) v = v >= 0 ? v + 0.05 : v - 0.05;
                       auto p = project(x);
                       return check([&] { return sum(mul(elementwise(x, kind), p)); }, {{"x", x}});
                     }});
  }
  cases.push_back({"add/mul/scale", [&] {
                     auto a = random_tensor({3, 4}, rng, -1, 1, true);
                     auto b = random_tensor({3, 4}, rng, -1, 1, true);
                     auto p = project(a);
                     return check([&] { return sum(mul(scale(add(mul(a, b), a), 1.5), p)); }, {{"a", a}, {"b", b}});
                   }});
  cases.push_back({"add_row_bias/matmul", [&] {
                     auto a = random_tensor({3, 4}, rng, -1, 1, true);
                     auto b = random_tensor({4, 5}, rng, -1, 1, true);
                     auto c = random_tensor({5}, rng, -1, 1, true);
                     auto p = project(matmul(a, b));
                     return check([&] { return sum(mul(add_row_bias(matmul(a, b), c), p)); },
                                  {{"a", a}, {"b", b}, {"bias", c}});
                   }});
  cases.push_back({"bmm/transpose", [&] {
                     auto a = random_tensor({2, 3, 4}, rng, -1, 1, true);
                     auto b = random_tensor({2, 5, 4}, rng, -1, 1, true);
                     auto p = project(bmm(a, transpose(b)));
                     return check([&] { return sum(mul(bmm(a, transpose(b)), p)); }, {{"a", a}, {"b", b}});
                   }});
  cases.push_back({"rowsoftmax", [&] {
                     auto x = random_tensor({2, 3, 5}, rng, -2, 2, true);
                     auto p = project(x);
                     return check([&] { return sum(mul(rowsoftmax(x), p)); }, {{"x", x}});
                   }});
  cases.push_back({"layout", [&] {
                     auto x = random_tensor({2, 3, 2, 4}, rng, -1, 1, true);
                     auto y = random_tensor({2, 1, 2, 4}, rng, -1, 1, true);
                     auto z = random_tensor({1, 4, 2, 4}, rng, -1, 1, true);
                     auto p = project(Tensor<double>::zeros({3, 4, 2, 4}));
                     return check(
                         [&] {
                           auto rows = reshape(pixels_to_rows(x), {2, 8, 3});
                           auto cat = concat_channels(rows_to_pixels(rows, 2, 4), y);
                           return sum(mul(concat_batch<double>({cat, z}), p));
                         },
                         {{"x", x}, {"y", y}, {"z", z}});
                   }});
  cases.push_back({"sum/mean", [&] {
                     auto x = random_tensor({3, 3}, rng, -1, 1, true);
                     return check([&] { return add(mean(mul(x, x)), sum(x)); }, {{"x", x}});
                   }});
  cases.push_back({"bce_with_logits", [&] {
                     auto z = random_tensor({2, 6}, rng, -4, 4, true);
                     std::vector<double> t(12);
                     for (auto& v : t) v = bernoulli(rng, 0.5) ? 1.0 : 0.0;
                     auto y = Tensor<double>::from({2, 6}, t);
                     return check([&] { return bce_with_logits(z, y); }, {{"z", z}});
                   }});

  double worst = 0;
  std::string worst_name;
  for (auto& c : cases) {
    const double e = c.run();
    if (!(e <= worst)) {
      worst = e;
      worst_name = c.name;
    }
  }

  nn::ModelConfig cfg;
  cfg.image_size = 16;
  cfg.depth = 2;
  cfg.channels = {4, 8};
  cfg.bottleneck = 16;
  cfg.max_tokens = 8;
  cfg.d_e = 8;
  cfg.init_seed = 3;
  nn::Network<double> net(cfg);
  auto images = random_tensor({2, 1, 16, 16}, rng, 0, 1);
  std::vector<double> m(2 * 16 * 16);
  for (auto& v : m) v = bernoulli(rng, 0.3) ? 1.0 : 0.0;
  auto masks = Tensor<double>::from({2, 1, 16, 16}, m);
  std::vector<text::ReportEmbedding> reports;
  for (const char* r : {"Large left apical pneumothorax.", "Small right basal pneumothorax. No rib fracture."})
    reports.push_back(text::embed(text::tokenize(r, 8), 8, 0));
  const text::ReportEmbedding* ptrs[] = {&reports[0], &reports[1]};
  auto text_batch = nn::TextBatch<double>::from(ptrs);
  auto loss_fn = [&] { return bce_with_logits(net.forward(images, &text_batch, Mode::train), masks); };
  auto report = finite_diff_check(loss_fn, net.parameters(), 1e-5, 60, 7);
  const double model_err = report.max_rel_error();
  const double secs = seconds_since(t0);
  verdict("AC-1", worst < 1e-3 && model_err < 1e-3 && report.entries.size() >= 50 && secs < 300,
          fmt("%zu primitive checks max rel err %.2e (%s); ContEXTual Net 16x16 max rel err %.2e over %zu "
              "parameters; %.1f s",
              cases.size(), worst, worst_name.c_str(), model_err, report.entries.size(), secs));
}

// AC-2 -----------------------------------------------------------------------

void ac2() {
  Rng rng(77);
  double worst_row = 0, worst_perm = 0;
  bool bounded = true, annihilated = true;
  for (int pass = 0; pass < 100; ++pass) {
    nn::ModelConfig cfg;
    cfg.image_size = 16;
    cfg.depth = 2;
    cfg.channels = {4, 8};
    cfg.bottleneck = 16;
    cfg.d_e = 8;
    cfg.max_tokens = 6;
    cfg.init_seed = static_cast<std::uint64_t>(pass);
    nn::Network<double> net(cfg);
    const std::size_t n = 2, l = cfg.max_tokens;
    auto images = random_tensor({n, 1, 16, 16}, rng, 0, 1);
    std::vector<text::ReportEmbedding> reports(n);
    for (auto& r : reports) {
      r.length = l;
      r.width = cfg.d_e;
      r.valid_len = l;
      for (std::size_t i = 0; i < l * cfg.d_e; ++i) r.matrix.push_back(static_cast<float>(uniform(rng, -1, 1)));
    }
    auto batch_of = [](const std::vector<text::ReportEmbedding>& rs) {
      std::vector<const text::ReportEmbedding*> p;
      for (const auto& r : rs) p.push_back(&r);
      return nn::TextBatch<double>::from(p);
    };
    auto text_batch = batch_of(reports);
    nn::AttentionTrace<double> trace;
    auto logits = net.forward(images, &text_batch, Mode::eval, &trace);

    for (const auto& level : trace.levels) {
      for (std::size_t i = 0; i < level.query.numel(); ++i)
        bounded = bounded && std::abs(level.gated.data()[i]) <= std::abs(level.query.data()[i]);
      // Recompute the attention weights from the level's parameters.
      const auto& p = net.attention(level.level);
      const std::size_t c = level.query.dim(1), hw = level.query.dim(2) * level.query.dim(3);
      auto q = reshape(nn::linear(reshape(pixels_to_rows(level.query), {n * hw, c}), p.wq), {n, hw, c});
      auto kv = nn::linear(reshape(text_batch.embeddings, {n * l, cfg.d_e}), p.text_proj);
      auto k = reshape(nn::linear(kv, p.wk), {n, l, c});
      auto weights = rowsoftmax(scale(bmm(q, transpose(k)), 1.0 / std::sqrt(double(c))));
      for (std::size_t r = 0; r < n * hw; ++r) {
        double s = 0;
        for (std::size_t t = 0; t < l; ++t) s += weights.data()[r * l + t];
        worst_row = std::max(worst_row, std::abs(s - 1.0));
      }
    }

    auto permuted = reports;
    std::vector<std::size_t> order(l);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t t = 0; t < l; ++t)
        std::copy_n(reports[b].matrix.begin() + order[t] * cfg.d_e, cfg.d_e, permuted[b].matrix.begin() + t * cfg.d_e);
    auto permuted_batch = batch_of(permuted);
    auto logits_p = net.forward(images, &permuted_batch, Mode::eval);
    for (std::size_t i = 0; i < logits.numel(); ++i)
      worst_perm = std::max(worst_perm, std::abs(logits.data()[i] - logits_p.data()[i]));

    for (std::size_t lvl = 1; lvl <= cfg.depth; ++lvl) {
      auto& p = net.attention(lvl);
      std::fill(p.wv.weight.data().begin(), p.wv.weight.data().end(), 0.0);
      std::fill(p.wv.bias.data().begin(), p.wv.bias.data().end(), 0.0);
    }
    nn::AttentionTrace<double> zero_trace;
    net.forward(images, &text_batch, Mode::eval, &zero_trace);
    for (const auto& level : zero_trace.levels)
      for (double v : level.gated.data()) annihilated = annihilated && v == 0.0;
  }
  verdict("AC-2", worst_row <= 1e-6 && bounded && worst_perm <= 1e-6 && annihilated,
          fmt("100 passes: max |row sum - 1| %.2e; |Q*| <= |Q| %s; permutation max diff %.2e; zero-Wv gives Q*=0 %s",
              worst_row, bounded ? "holds" : "violated", worst_perm, annihilated ? "exactly" : "not exactly"));
}

// AC-3 -----------------------------------------------------------------------

void ac3() {
  Rng rng(3);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double density = uniform(rng, 0.0, 1.0);
    std::vector<std::uint8_t> a(256), b(256);
    for (auto& v : a) v = bernoulli(rng, density);
    for (auto& v : b) v = bernoulli(rng, density);
    long both = 0, na = 0, nb = 0;
    for (int i = 0; i < 256; ++i) {
      both += a[i] & b[i];
      na += a[i];
      nb += b[i];
    }
    const double oracle = na + nb == 0 ? 1.0 : 2.0 * double(both) / double(na + nb);
    mismatches += data::dice(a, b) != oracle;
  }
  std::vector<std::uint8_t> empty(256, 0), left(256, 0), right(256, 0);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 8; ++x) left[y * 16 + x] = right[y * 16 + x + 8] = 1;
  const bool edges = data::dice(left, left) == 1.0 && data::dice(left, right) == 0.0 && data::dice(empty, empty) == 1.0;
  verdict("AC-3", mismatches == 0 && edges,
          fmt("%zu/1000 mismatches vs brute-force count; Dice(A,A)=1, disjoint=0, both-empty=1 %s", mismatches,
              edges ? "hold" : "violated"));
}

// AC-4 -----------------------------------------------------------------------

void ac4(const fs::path& work) {
  const std::string tiny =
      "--override model.image_size=32 --override model.depth=2 --override model.channels=[4,8] "
      "--override model.bottleneck=16 --override model.d_e=8 --override model.max_tokens=16 "
      "--override train.epochs=2 --override train.lr=0.001 --override train.folds=1 "
      "--override augment.p_hflip=0.5 --override augment.text_shuffle=true --override augment.text_synonym_p=0.2";
  std::uint64_t data_hash[2], ckpt_hash[2];
  bool ok = true;
  for (int r = 0; r < 2; ++r) {
    const auto dir = work / ("ac4_run" + std::to_string(r));
    fs::remove_all(dir);
    fs::create_directories(dir);
    ok = ok && run_cli("--seed 9 gen-data --n 60 --out " + (dir / "data").string() + " " + tiny, dir / "gen.log") == 0;
    ok = ok && run_cli("--seed 5 train --out " + (dir / "run").string() + " --override data.dir=" +
                           (dir / "data").string() + " " + tiny,
                       dir / "train.log") == 0;
    if (!ok) break;
    data_hash[r] = tree_hash(dir / "data");
    ckpt_hash[r] = file_hash(dir / "run" / "best.ctxn");
  }
  if (!ok) {
    verdict("AC-4", false, "a CLI run failed; see " + work.string() + "/ac4_run*/*.log");
    return;
  }
  verdict("AC-4", data_hash[0] == data_hash[1] && ckpt_hash[0] == ckpt_hash[1],
          fmt("gen-data tree hash %016llx vs %016llx; best.ctxn hash %016llx vs %016llx",
              (unsigned long long)data_hash[0], (unsigned long long)data_hash[1], (unsigned long long)ckpt_hash[0],
              (unsigned long long)ckpt_hash[1]));
}

// AC-5, AC-6, AC-7 -------------------------------------------------------------

TrainConfig experiment_config() {
  TrainConfig c;
  c.data.n = 512;
  c.data.generator.ambiguous_fraction = 0.75;
  c.model.image_size = 64;
  c.epochs = 40;
  c.folds = 3;
  c.lr = 1e-3;
  return c;
}

void experiments(const fs::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainConfig config = experiment_config();
  const auto dataset = load_or_generate(config);
  TrainOptions options;
  options.out_dir = work / "experiment";
  options.log = &std::cout;
  const auto table = ablate(config, dataset, options, 1, {Ablation::full, Ablation::no_text, Ablation::flip});
  const double secs = seconds_since(t0);

  const auto& full = table.arms[0].cv;
  const auto& no_text = table.arms[1].cv;
  const auto& flip = table.arms[2].cv;
  auto fold_means = [](const CrossValidation& cv) {
    std::string s;
    for (const auto& r : cv.records) s += fmt("%s%.3f", s.empty() ? "" : ",", r.test.mean);
    return s;
  };
  std::printf("  full    test Dice per fold [%s] median %.3f, ambiguous median %.3f\n", fold_means(full).c_str(),
              full.median, full.ambiguous_median);
  std::printf("  no_text test Dice per fold [%s] median %.3f, ambiguous median %.3f\n", fold_means(no_text).c_str(),
              no_text.median, no_text.ambiguous_median);
  std::printf("  flip    test Dice per fold [%s] median %.3f, ambiguous median %.3f\n", fold_means(flip).c_str(),
              flip.median, flip.ambiguous_median);
  std::printf("  three arms x %zu folds in %.0f s\n", config.fold_count(), secs);

  const double gap = full.median - no_text.median;
  verdict("AC-5", gap >= 0.10 && full.median >= 0.70 && no_text.ambiguous_median <= 0.60,
          fmt("median test Dice full %.3f vs no_text %.3f (gap %.3f, need >= 0.10; full needs >= 0.70); no_text on "
              "ambiguous samples %.3f (need <= 0.60)",
              full.median, no_text.median, gap, no_text.ambiguous_median));
  const double drop = full.median - flip.median;
  verdict("AC-6", drop >= 0.05,
          fmt("median test Dice full %.3f vs flip %.3f (drop %.3f, need >= 0.05)", full.median, flip.median, drop));

  // AC-7 on the fold-0 full-model checkpoint.
  const auto& record = full.records.front();
  auto net = nn::Network<float>::from_checkpoint(load_checkpoint(record.checkpoint_path));
  const TextSource text = TextSource::from_config(config);
  std::vector<data::Sample> ambiguous_test, large_test;
  for (const auto& id : record.test_ids) {
    const auto it = std::find_if(dataset.begin(), dataset.end(), [&](const data::Sample& s) { return s.id == id; });
    if (it->attrs.ambiguous) ambiguous_test.push_back(*it);
    if (it->attrs.size == data::Extent::large) large_test.push_back(*it);
  }
  const std::vector<WordSwap> sides{{"left", "right"}, {"right", "left"}};
  auto side_probe = word_swap_probe(net, ambiguous_test, sides, text, config.threshold);
  auto kept = summarize_probe(side_probe.outcomes,
                              [](const SwapOutcome& o) { return o.applied && o.dice_original >= 0.5; });
  const std::vector<WordSwap> sizes{{"large", "small"}};
  auto size_probe = word_swap_probe(net, large_test, sizes, text, config.threshold);
  verdict("AC-7", kept.applied > 0 && kept.flip_rate_pct >= 80.0 && size_probe.mean_area_ratio < 1.0,
          fmt("left<->right flips side on %.1f%% of %zu ambiguous test samples with Dice >= 0.5 (need >= 80%%); "
              "large->small mean area ratio %.3f over %zu samples (need < 1)",
              kept.flip_rate_pct, kept.applied, size_probe.mean_area_ratio, size_probe.applied));
}

// AC-8 -----------------------------------------------------------------------

void ac8() {
  data::GeneratorConfig gen;
  gen.image_size = 64;
  const auto samples = data::generate_dataset(50, 8, gen);
  aug::AugmentPolicy policy;
  bool identity = true, binary = true, involution = true, multiset = true;
  Rng rng(8);
  for (const auto& s : samples) {
    identity = identity && aug::photometric(s.image, aug::Photometric::brightness, 0.0) == s.image &&
               aug::photometric(s.image, aug::Photometric::contrast, 1.0) == s.image &&
               aug::photometric(s.image, aug::Photometric::gamma, 1.0) == s.image;
    for (auto kind : {aug::Warp::elastic, aug::Warp::grid, aug::Warp::optical, aug::Warp::ssr}) {
      aug::WarpParams zero;
      zero.kind = kind;
      const auto out = aug::geometric_distort(s, zero, rng);
      identity = identity && out.image == s.image && out.mask == s.mask;
    }
    const auto twice = aug::hflip(aug::hflip(s));
    involution = involution && twice.image == s.image && twice.mask == s.mask && twice.report == s.report;

    aug::AugmentPolicy heavy = policy;
    heavy.p_hflip = 0.5;
    heavy.p_photometric = heavy.p_distort = heavy.p_ssr = 1.0;
    for (std::uint64_t e = 0; e < 4; ++e) {
      const auto out = aug::augment_sample(s, heavy, aug::augment_seed(8, e, 0));
      binary = binary && std::all_of(out.mask.begin(), out.mask.end(), [](std::uint8_t v) { return v <= 1; });
    }

    auto before = aug::split_sentences(s.report);
    auto after = aug::split_sentences(aug::sentence_shuffle(s.report, rng));
    std::sort(before.begin(), before.end());
    std::sort(after.begin(), after.end());
    multiset = multiset && before == after;
  }

  aug::SynonymStats stats;
  Rng text_rng(15);
  std::size_t next = 0;
  while (stats.candidates < 10000) {
    aug::synonym_replace(samples[next % samples.size()].report, aug::default_lexicon(), 0.15, text_rng, &stats);
    ++next;
  }
  const double rate = double(stats.replaced) / double(stats.candidates);
  verdict("AC-8", identity && binary && involution && multiset && rate >= 0.14 && rate <= 0.16,
          fmt("zero-magnitude identities %s; masks binary %s; double hflip identity %s; sentence multiset kept %s; "
              "synonym rate %.4f over %zu candidate tokens",
              identity ? "exact" : "violated", binary ? "yes" : "no", involution ? "yes" : "no",
              multiset ? "yes" : "no", rate, stats.candidates));
}

// AC-9 -----------------------------------------------------------------------

void ac9() {
  TrainConfig c;
  c.model.image_size = 32;
  c.model.depth = 2;
  c.model.channels = {4, 8};
  c.model.bottleneck = 16;
  c.model.d_e = 8;
  c.model.max_tokens = 12;
  c.data.n = 40;
  c.epochs = 2;
  c.lr = 1e-3;
  const auto dataset = load_or_generate(c);

  auto table = std::make_shared<text::EmbeddingTable>();
  for (const auto& s : dataset) (*table)[s.id] = text::embed(text::tokenize(s.report, 12), 8, 99);
  const auto before = text::encode_embeddings(*table);
  const TextSource precomputed(8, 12, 99, table);
  TrainOptions options;
  options.text = &precomputed;
  const auto run_a = train(c, dataset, 0, options);

  const TextSource hashed = TextSource::from_config(c);
  std::vector<text::ReportEmbedding> hashed_before;
  for (const auto& s : dataset) hashed_before.push_back(hashed.embed(s, false));
  TrainOptions hashed_options;
  hashed_options.text = &hashed;
  const auto run_b = train(c, dataset, 0, hashed_options);
  bool hashed_same = true;
  for (std::size_t i = 0; i < dataset.size(); ++i) hashed_same = hashed_same && hashed.embed(dataset[i], false) == hashed_before[i];

  const bool table_same = text::encode_embeddings(*table) == before;
  verdict("AC-9",
          table_same && hashed_same && !run_a.record.text_gradient_seen && !run_b.record.text_gradient_seen,
          fmt("precomputed table bytes %s, hashed embeddings %s after training; text gradient seen: %s / %s",
              table_same ? "unchanged" : "CHANGED", hashed_same ? "unchanged" : "CHANGED",
              run_a.record.text_gradient_seen ? "yes" : "no", run_b.record.text_gradient_seen ? "yes" : "no"));
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "ctxn_acceptance";
  bool quick = false;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else if (arg == "--quick") {
      quick = true;
    } else {
      std::fprintf(stderr, "usage: %s [--work DIR] [--quick]\n", argv[0]);
      return 2;
    }
  }
  fs::create_directories(work);

  auto guarded = [](const char* id, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      verdict(id, false, std::string("exception: ") + e.what());
    }
  };
  guarded("AC-1", ac1);
  guarded("AC-2", ac2);
  guarded("AC-3", ac3);
  guarded("AC-4", [&] { ac4(work); });
  if (quick) {
    std::printf("AC-5 SKIP: --quick\nAC-6 SKIP: --quick\nAC-7 SKIP: --quick\n");
  } else {
    guarded("AC-5", [&] { experiments(work); });
  }
  guarded("AC-8", ac8);
  guarded("AC-9", ac9);
  std::printf("%s\n", failures == 0 ? "all criteria passed" : fmt("%d criteria failed", failures).c_str());
  return failures == 0 ? 0 : 1;
}
