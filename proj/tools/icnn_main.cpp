#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "icnn/checks.hpp"
#include "icnn/collision.hpp"
#include "icnn/error.hpp"
#include "icnn/rng.hpp"
#include "icnn/run.hpp"
#include "json.hpp"

namespace {

using namespace icnn;

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValueError("cannot write " + path);
  out << text;
}

int cmd_train(const RunConfig& cfg) {
  RunResult res = run_train(cfg);
  std::printf("model %s  variant %s  params %lld  macs/sample %lld\n",
              res.spec.name.c_str(), cfg.variant.c_str(),
              (long long)res.param_count, (long long)res.total_macs);
  if (!res.metrics.empty()) {
    const auto& last = res.metrics.back();
    std::printf("epoch %lld  train %.4f/%.4f  eval %.4f/%.4f\n",
                (long long)last.epoch, last.train_loss, last.train_acc,
                last.eval_loss, last.eval_acc);
  }
  if (!cfg.out_dir.empty())
    std::printf("artifacts in %s\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_verify(const std::string& check, const CheckOptions& opt) {
  std::vector<CheckResult> results =
      check.empty() ? all_checks(opt)
                    : std::vector<CheckResult>{run_named_check(check, opt)};
  bool all_pass = true;
  std::printf("%-15s %-6s %8s  %s\n", "check", "result", "seconds",
              "detail");
  for (const auto& r : results) {
    std::printf("%-15s %-6s %8.2f  %s\n", r.name.c_str(),
                r.pass ? "pass" : "FAIL", r.seconds, r.detail.c_str());
    all_pass = all_pass && r.pass;
  }
  if (!all_pass) {
    for (const auto& r : results)
      if (!r.pass)
        std::fprintf(stderr, "property violated: %s\n", r.name.c_str());
    return 1;
  }
  return 0;
}

int cmd_xor(int64_t seeds, int64_t steps, double lr,
            const std::string& dump_path) {
  XorReport rep = run_xor(seeds, steps, lr);
  for (int64_t s = 0; s < rep.seeds; ++s) {
    int64_t at = rep.ic_solve_step[size_t(s)];
    if (at >= 0)
      std::printf("seed %lld: gated neuron 4/4 at step %lld\n", (long long)s,
                  (long long)at);
    else
      std::printf("seed %lld: gated neuron unsolved after %lld steps\n",
                  (long long)s, (long long)steps);
  }
  std::printf("gated neuron: %d/%lld solved\n", rep.ic_successes,
              (long long)rep.seeds);
  std::printf("plain relu neuron: %d/%lld solved, best %d/4 points\n",
              rep.std_successes, (long long)rep.seeds, rep.std_max_correct);
  if (!dump_path.empty()) {
    if (!rep.have_neuron)
      throw ValueError("no solved run to dump regions from");
    TwoInputNeuron n =
        TwoInputNeuron::with_inner(rep.w1, rep.w2, rep.b1, rep.w1 - rep.wp,
                                   rep.w2 - rep.wp, rep.b2);
    write_text_file(dump_path, region_map_csv(region_map(n)));
    std::printf("region map written to %s\n", dump_path.c_str());
  }
  return 0;
}

int cmd_analyze(const std::string& model_path, const std::string& json_path) {
  ModelSpec base = ModelSpec::from_json_file(model_path);
  PairedVariants pv = paired_variants(base);
  Network a = build_model(pv.baseline, 1);
  Network b = build_model(pv.ic_layer, 1);
  Network c = build_model(pv.ic_block, 1);
  CostReport ra = count_costs(a, pv.baseline.input);
  CostReport rb = count_costs(b, pv.ic_layer.input);
  CostReport rc = count_costs(c, pv.ic_block.input);

  std::printf("%-28s %12s %12s %12s %14s %14s %14s\n", "layer",
              "params", "params-ic", "params-blk", "macs", "macs-ic",
              "macs-blk");
  for (size_t i = 0; i < ra.rows.size(); ++i) {
    std::printf("%-28s %12lld %12lld %12lld %14lld %14lld %14lld\n",
                ra.rows[i].layer.c_str(), (long long)ra.rows[i].params,
                (long long)rb.rows[i].params, (long long)rc.rows[i].params,
                (long long)ra.rows[i].macs, (long long)rb.rows[i].macs,
                (long long)rc.rows[i].macs);
  }
  std::printf("%-28s %12lld %12lld %12lld %14lld %14lld %14lld\n", "total",
              (long long)ra.total_params, (long long)rb.total_params,
              (long long)rc.total_params, (long long)ra.total_macs,
              (long long)rb.total_macs, (long long)rc.total_macs);

  if (!json_path.empty()) {
    nlohmann::json j;
    j["baseline"] = nlohmann::json::parse(ra.to_json_text());
    j["ic_layer"] = nlohmann::json::parse(rb.to_json_text());
    j["ic_block"] = nlohmann::json::parse(rc.to_json_text());
    write_text_file(json_path, j.dump(2) + "\n");
  }
  return 0;
}

int cmd_synth(const std::string& out_dir, int64_t train_n, int64_t test_n,
              uint64_t seed) {
  std::filesystem::create_directories(out_dir);
  LabeledDataset train = synthetic_digits(train_n, seed);
  LabeledDataset test = synthetic_digits(test_n, derive_seed(seed, 0x7E57));
  write_idx(train, out_dir + "/train-images-idx3-ubyte",
            out_dir + "/train-labels-idx1-ubyte");
  write_idx(test, out_dir + "/t10k-images-idx3-ubyte",
            out_dir + "/t10k-labels-idx1-ubyte");
  std::printf("wrote %lld train and %lld test glyph images to %s\n",
              (long long)train_n, (long long)test_n, out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "training, verification, and analysis for collision-gated networks"};
  app.require_subcommand(1);

  RunConfig run_cfg;
  run_cfg.train.epochs = 5;
  run_cfg.out_dir = "run_out";
  auto* train = app.add_subcommand("train", "train a model and write "
                                            "metrics/manifest artifacts");
  train->add_option("--model", run_cfg.model_path, "model spec json")
      ->required();
  train->add_option("--ic", run_cfg.variant, "unit variant")
      ->check(CLI::IsMember({"none", "layer", "block"}))
      ->capture_default_str();
  train->add_option("--data", run_cfg.data.name, "dataset")
      ->check(CLI::IsMember({"xor", "mnist", "cifar10"}))
      ->capture_default_str();
  train->add_option("--data-dir", run_cfg.data.dir, "dataset directory")
      ->envname("DATA_DIR");
  train->add_option("--epochs", run_cfg.train.epochs, "training epochs")
      ->capture_default_str();
  train->add_option("--batch", run_cfg.train.batch_size, "minibatch size")
      ->capture_default_str();
  train->add_option("--lr", run_cfg.train.lr0, "initial learning rate")
      ->capture_default_str();
  train->add_option("--momentum", run_cfg.train.momentum, "sgd momentum")
      ->capture_default_str();
  train->add_option("--wd", run_cfg.train.weight_decay, "weight decay")
      ->capture_default_str();
  train
      ->add_option("--lr-drop-every", run_cfg.train.lr_drop_every,
                   "epochs between lr steps (0 disables)")
      ->capture_default_str();
  train
      ->add_option("--lr-drop-factor", run_cfg.train.lr_drop_factor,
                   "multiplier at each lr step")
      ->capture_default_str();
  train->add_option("--seed", run_cfg.train.seed, "master seed")
      ->capture_default_str();
  train->add_option("--out", run_cfg.out_dir, "artifact directory")
      ->capture_default_str();
  train->add_option("--subset", run_cfg.data.train_subset,
                    "first-K training subset (-1 = dataset default)");
  train->add_option("--eval-subset", run_cfg.data.eval_subset,
                    "first-K eval subset (-1 = dataset default)");
  train->add_flag("--full", run_cfg.data.full, "use the full dataset");
  train->add_option("--aug-pad", run_cfg.data.aug_pad,
                    "pad-and-crop pixels (-1 = dataset default)");
  train->add_option("--aug-flip", run_cfg.data.aug_flip,
                    "horizontal flip probability (-1 = dataset default)");
  train->add_flag("--decay-exempt-gates", run_cfg.train.decay_exempt_norm_gate,
                  "skip weight decay on norm affines and gate weights");
  train->add_flag("-v,--verbose", run_cfg.verbose, "per-epoch progress");

  std::string check_name;
  CheckOptions check_opt;
  auto* verify = app.add_subcommand("verify", "run the property suite");
  verify->add_option("--check", check_name,
                     "single check (default: all): equivalence, reduction, "
                     "gradcheck, overhead, overhead_grid, angle_sweep, "
                     "collision, shapes, kernels");
  verify->add_option("--trials", check_opt.trials, "trial count override");
  verify->add_option("--dim", check_opt.dim, "dimension override");
  verify->add_option("--k", check_opt.k, "kernel size")
      ->capture_default_str();
  verify->add_option("--cin", check_opt.cin, "input channels")
      ->capture_default_str();
  verify->add_option("--cout", check_opt.cout, "output channels")
      ->capture_default_str();
  verify->add_option("--seed", check_opt.seed, "randomness seed")
      ->capture_default_str();

  int64_t xor_seeds = 10, xor_steps = 5000;
  double xor_lr = 0.1;
  std::string xor_dump;
  auto* xo = app.add_subcommand(
      "xor", "single gated neuron vs single relu neuron on XOR");
  xo->add_option("--seeds", xor_seeds, "number of seeds")
      ->capture_default_str();
  xo->add_option("--steps", xor_steps, "full-batch steps per seed")
      ->capture_default_str();
  xo->add_option("--lr", xor_lr, "learning rate")->capture_default_str();
  xo->add_option("--dump-regions", xor_dump,
                 "write the trained neuron's region map csv here");

  std::string analyze_model, analyze_json;
  auto* analyze = app.add_subcommand(
      "analyze", "side-by-side cost accounting of the three variants");
  analyze->add_option("--model", analyze_model, "model spec json")
      ->required();
  analyze->add_option("--json", analyze_json, "also write report json here");

  std::string replay_manifest, replay_out = "replay_out";
  auto* replay = app.add_subcommand("replay",
                                    "re-run a training manifest verbatim");
  replay->add_option("--manifest", replay_manifest, "manifest.json path")
      ->required();
  replay->add_option("--out", replay_out, "artifact directory")
      ->capture_default_str();

  std::string synth_out;
  int64_t synth_train = 12000, synth_test = 2000;
  uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand(
      "synth", "write procedurally drawn digit IDX files (loader-compatible "
               "stand-in corpus)");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--train", synth_train, "training image count")
      ->capture_default_str();
  synth->add_option("--test", synth_test, "test image count")
      ->capture_default_str();
  synth->add_option("--seed", synth_seed, "generator seed")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) {
      run_cfg.argv.assign(argv, argv + argc);
      return cmd_train(run_cfg);
    }
    if (*verify) return cmd_verify(check_name, check_opt);
    if (*xo) return cmd_xor(xor_seeds, xor_steps, xor_lr, xor_dump);
    if (*analyze) return cmd_analyze(analyze_model, analyze_json);
    if (*replay) {
      run_manifest_file(replay_manifest, replay_out);
      std::printf("replayed into %s\n", replay_out.c_str());
      return 0;
    }
    if (*synth) return cmd_synth(synth_out, synth_train, synth_test,
                                 synth_seed);
  } catch (const PropertyViolation& e) {
    std::fprintf(stderr, "property violation: %s\n", e.what());
    return 1;
  } catch (const StateError& e) {
    std::fprintf(stderr, "state error: %s\n", e.what());
    return 1;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
