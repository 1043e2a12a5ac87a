#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "icnn/data.hpp"
#include "icnn/model.hpp"
#include "icnn/train.hpp"

namespace icnn {

struct DataConfig {
  std::string name = "mnist";  // xor | mnist | cifar10
  std::string dir;
  int64_t train_subset = -1;  // -1 = dataset default, 0 = full
  int64_t eval_subset = -1;
  bool full = false;
  int64_t aug_pad = -1;   // -1 = dataset default
  double aug_flip = -1.0;
};

struct DataBundle {
  LabeledDataset train;
  LabeledDataset eval;
  std::vector<double> mean;  // training-subset statistics actually applied
  std::vector<double> stdev;
  Augmenter aug;  // seed left 0; runner stamps it
};

DataBundle load_data(const DataConfig& cfg);

struct RunConfig {
  std::string model_path;  // ignored when spec_text is set
  std::string spec_text;
  std::string variant = "none";  // none | layer | block
  DataConfig data;
  TrainConfig train;
  std::string out_dir;
  std::vector<std::string> argv;
  bool verbose = false;
};

struct RunResult {
  ModelSpec spec;  // variant-resolved spec that was trained
  std::vector<MetricsRecord> metrics;
  int64_t param_count = 0;
  int64_t total_macs = 0;
  std::shared_ptr<Network> net;
};

ModelSpec resolve_variant(const ModelSpec& base, const std::string& variant);

// Trains and, when out_dir is set, writes manifest.json, metrics.csv,
// summary.json, params.bin.
RunResult run_train(const RunConfig& cfg);

std::string manifest_json(const RunConfig& cfg, const ModelSpec& resolved);
RunConfig config_from_manifest_text(const std::string& text);
RunResult run_manifest_file(const std::string& path,
                            const std::string& out_dir);

std::string metrics_csv(const std::vector<MetricsRecord>& records);

// "ICNP" + u32 version + u32 count, then per tensor: u32 name length, name
// bytes, u32 rank, u64 dims, f64 values; all little-endian.
void write_params_bin(const std::string& path,
                      const std::vector<ParamRef>& params);
std::vector<std::pair<std::string, Tensor>> read_params_bin(
    const std::string& path);

struct XorReport {
  int64_t seeds = 0;
  int64_t steps = 0;
  double lr = 0.0;
  int ic_successes = 0;
  int std_successes = 0;      // full 4/4 runs for the plain neuron
  int std_max_correct = 0;    // best points-correct any plain neuron reached
  std::vector<int64_t> ic_solve_step;  // -1 where unsolved
  // last solved gated neuron, for region dumps
  bool have_neuron = false;
  double w1 = 0, w2 = 0, b1 = 0, b2 = 0, wp = 0;
};

// Single gated neuron vs single ReLU neuron on the four XOR points,
// full-batch gradient descent on squared error against targets 1-label.
XorReport run_xor(int64_t seeds, int64_t steps, double lr);

}  // namespace icnn
