/*
 * Copyright 2026 The capgen Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "capgen/pipeline.hpp"
#include "support/beam_oracle.hpp"
#include "support/bleu_oracle.hpp"
#include "support/caption_checks.hpp"
#include "support/checkpoint_checks.hpp"
#include "support/cli_runner.hpp"
#include "support/fold_checks.hpp"
#include "support/gradcheck_cases.hpp"
#include "support/objective_checks.hpp"
#include "support/overfit.hpp"
#include "support/scheduler_checks.hpp"
#include "support/toy_data.hpp"

using namespace capgen;
using namespace capgen::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

Outcome gradcheck_suite() {
  const auto start = std::chrono::steady_clock::now();
  double worst_op = 0.0;
  std::string worst_name;
  std::size_t ops = 0;
  for (const auto& r : run_op_gradchecks(20)) {
    ++ops;
    if (r.max_rel_error >= worst_op) {
      worst_op = r.max_rel_error;
      worst_name = r.name;
    }
  }
  double worst_enc = 0.0, worst_dec = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    worst_enc = std::max(worst_enc, encoder_gradcheck(seed).max_rel_error);
    worst_dec = std::max(worst_dec, decoder_gradcheck(seed).max_rel_error);
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst_op < 1e-6 && worst_enc < 1e-5 && worst_dec < 1e-5 && seconds < 120.0,
          std::to_string(ops) + " ops x20, worst " + fmt(worst_op) + " (" + worst_name + "); encoder " +
              fmt(worst_enc) + ", decoder " + fmt(worst_dec) + " over 20 seeds; " + fmt(seconds) + " s"};
}

Outcome beam_oracle() {
  const auto start = std::chrono::steady_clock::now();
  const BeamOracleReport r = run_beam_oracle(120);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {r.exact_matches == r.draws && r.greedy_matches == r.draws && r.draws >= 100 && seconds < 60.0,
          std::to_string(r.exact_matches) + "/" + std::to_string(r.draws) + " exact, width 1 == greedy on " +
              std::to_string(r.greedy_matches) + "; " + fmt(seconds) + " s"};
}

Outcome bleu_oracle() {
  const BleuOracleReport r = run_bleu_oracle(50);
  const Tokens s = {"một", "khối", "đỏ", "ở", "giữa"};
  const bool perfect = bleu4({s, s}, {s, s}).bleu4 == 1.0;
  return {r.examples_ok && perfect && r.max_abs_error < 1e-12 && r.cases == 53,
          std::to_string(r.cases) + " cases, max |diff| " + fmt(r.max_abs_error) + ", perfect corpus " +
              (perfect ? "1.0" : "not 1.0")};
}

Outcome objective_linearity() {
  double value = 0.0, grad = 0.0;
  bool exact = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const LinearityReport r = linearity_check(seed);
    value = std::max(value, r.value_error);
    grad = std::max(grad, r.gradient_error);
    exact = exact && r.beta_zero_exact && r.disabled_exact && r.rate_zero_exact;
  }
  return {value < 1e-6 && grad < 1e-5 && exact,
          "value " + fmt(value) + ", gradient " + fmt(grad) + ", degenerate cases " + (exact ? "exact" : "FAIL")};
}

Outcome scheduler_closed_form() {
  double worst = 0.0;
  std::size_t probes = 0;
  for (double t_mult : {1.0, 2.0}) {
    for (double eta_min : {0.0, 0.05}) {
      for (const auto& p : schedule_probes(10, t_mult, eta_min)) {
        worst = std::max(worst, std::abs(p.actual - p.expected));
        ++probes;
      }
    }
  }
  return {worst < 1e-9, std::to_string(probes) + " probes over 3 cycles, max |diff| " + fmt(worst)};
}

Outcome overfit() {
  TempDir dir("accept_overfit");
  const OverfitReport r = run_overfit(dir.path());
  std::string detail = std::to_string(r.steps) + " steps, final total " + fmt(r.final_total) + ", " +
                       std::to_string(r.reproduced) + "/" + std::to_string(r.samples) + " captions, bleu4 " +
                       fmt(r.bleu4) + ", " + fmt(r.seconds) + " s";
  if (!r.mismatches.empty()) detail += "; first mismatch " + r.mismatches.front();
  return {r.steps == 500 && r.final_total < 0.05 && r.reproduced == 8 && r.samples == 8 && r.bleu4 == 1.0 &&
              r.seconds < 300.0,
          detail};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Outcome pipeline_invariants() {
  const CleanFuzzReport fuzz = clean_fuzz(1000, 7);

  std::mt19937_64 rng(17);
  std::size_t folds_ok = 0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = 4 + rng() % 60;
    const std::uint64_t seed = rng();
    const FoldSplit split = kfold_split(n, 4, seed);
    folds_ok += fold_violation(split, n, 4).empty() && kfold_split(n, 4, seed).folds == split.folds;
  }

  const bool roundtrip = checkpoint_roundtrip_ok(sample_checkpoint());

  TempDir dir("accept_determinism");
  write_toy_dataset(dir / "data");
  RunConfig cfg = toy_config();
  cfg.train.batch_size = 4;
  cfg.train.epochs = 3;
  train(cfg, dir / "data", dir / "a");
  train(cfg, dir / "data", dir / "b");
  const std::string log_a = slurp(dir / "a" / "train_log.jsonl");
  const bool deterministic = !log_a.empty() && log_a == slurp(dir / "b" / "train_log.jsonl") &&
                             slurp(dir / "a" / "fold0.ckpt") == slurp(dir / "b" / "fold0.ckpt");

  const bool clean_ok = fuzz.idempotent == 1000 && fuzz.well_formed == 1000;
  std::string detail = "clean " + std::to_string(fuzz.idempotent) + "/1000 idempotent, " +
                       std::to_string(fuzz.well_formed) + "/1000 well-formed; folds " + std::to_string(folds_ok) +
                       "/50; checkpoint round trip " + (roundtrip ? "ok" : "FAIL") + "; seeded runs " +
                       (deterministic ? "identical" : "DIFFER");
  if (!fuzz.first_failure.empty()) detail += "; " + fuzz.first_failure;
  return {clean_ok && folds_ok == 50 && roundtrip && deterministic, detail};
}

Outcome ablation_harness() {
  TempDir dir("accept_ablation");
  write_toy_dataset(dir / "data");
  RunConfig base = toy_config();
  base.train.batch_size = 4;
  base.decode.max_len = 10;
  std::ofstream(dir / "toy.json") << base.to_json();

  struct Variant {
    std::string name, flags;
    AblationSwitches expect;
  };
  const std::vector<Variant> variants = {
      {"full", "", {true, true, true, true}},
      {"no-preprocess", "--no-preprocess", {true, true, true, false}},
      {"no-beam", "--no-beam", {true, false, true, true}},
      {"no-noise", "--no-noise", {false, true, true, true}},
  };
  std::set<std::string> configs;
  std::size_t ok = 0;
  std::string problems;
  for (const auto& v : variants) {
    const auto out = dir / v.name;
    const CliResult r = run_cli(CAPGEN_BINARY,
                                "train --config " + shell_quote((dir / "toy.json").string()) + " --data " +
                                    shell_quote((dir / "data").string()) + " --out " + shell_quote(out.string()) +
                                    " --folds 2 --epochs 1 -q " + v.flags,
                                dir / "stderr.txt");
    bool good = r.code == 0;
    if (good) {
      const RunConfig cfg = RunConfig::load(out / "run_config.json");
      configs.insert(cfg.to_json());
      good = cfg.ablation == v.expect;
      std::ifstream log(out / "train_log.jsonl");
      std::size_t lines = 0;
      for (std::string line; std::getline(log, line); ++lines) {
        const auto j = nlohmann::ordered_json::parse(line);
        std::vector<std::string> keys;
        for (const auto& [k, val] : j.items()) keys.push_back(k);
        good = good && keys == std::vector<std::string>{"fold", "step", "lr_factor", "main", "fake", "total"};
        if (!v.expect.noise) {
          // total is accumulated in float, main in double.
          const double main = j["main"].get<double>(), total = j["total"].get<double>();
          good = good && j["fake"] == 0.0 && std::abs(total - main) <= 1e-6 * std::abs(main);
        }
      }
      // Two folds of four training samples at batch 4: one step per fold.
      good = good && lines == 2;
      for (int f = 0; f < 2; ++f) {
        const auto ckpt = out / ("fold" + std::to_string(f) + ".ckpt");
        const auto eval = out / ("fold" + std::to_string(f) + "_eval.json");
        good = good && std::filesystem::exists(ckpt) && std::filesystem::exists(eval);
        if (good) good = BleuReport::from_json(slurp(eval)).bleu4 >= 0.0;
      }
      if (good && !v.expect.preprocess) good = load_checkpoint(out / "fold0.ckpt").vocab.size() !=
                                               load_checkpoint(dir / "full" / "fold0.ckpt").vocab.size();
    }
    if (good) {
      ++ok;
    } else {
      problems += " " + v.name + "(exit " + std::to_string(r.code) + ")";
    }
  }
  return {ok == 4 && configs.size() == 4,
          std::to_string(ok) + "/4 configurations ran with the expected structure, " +
              std::to_string(configs.size()) + " distinct recorded configs" + problems};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient checks (ops and composed graphs)", gradcheck_suite},
      {"beam search vs exhaustive enumeration", beam_oracle},
      {"BLEU4 vs naive n-gram oracle", bleu_oracle},
      {"noise-injected objective linearity", objective_linearity},
      {"warm-restart schedule closed form", scheduler_closed_form},
      {"end-to-end overfit on the toy set", overfit},
      {"pipeline invariants", pipeline_invariants},
      {"ablation harness", ablation_harness},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << i + 1 << ". " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
            << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
