#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "icnn/data.hpp"
#include "icnn/model.hpp"

namespace icnn {

struct TrainConfig {
  double lr0 = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int64_t epochs = 1;
  int64_t batch_size = 128;
  int64_t lr_drop_every = 30;   // epochs per step-decay; 0 disables
  double lr_drop_factor = 0.1;
  uint64_t seed = 0;
  bool decay_exempt_norm_gate = false;  // skip decay on BN affine and gates

  void validate() const;
};

struct MetricsRecord {
  int64_t epoch = 0;  // 1-based in reports
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double eval_loss = 0.0;
  double eval_acc = 0.0;
  double wall_seconds = 0.0;
};

double lr_at(int64_t epoch, const TrainConfig& cfg);  // epoch is 0-based

// v <- momentum*v + (grad + wd*p); p <- p - lr*v. Gradients are cleared.
void sgd_step(std::vector<ParamRef>& params,
              std::vector<std::vector<double>>& velocity,
              const TrainConfig& cfg, double lr);

// Mean loss and top-1 accuracy with inference-mode normalization, no
// gradient taping. Leaves the network in evaluation mode.
std::pair<double, double> evaluate(Network& net, const LabeledDataset& ds,
                                   int64_t batch_size);

// One record per epoch. Fully determined by (net initial state, datasets,
// cfg, aug): shuffles, batching, and augmentation all derive from cfg.seed.
// Non-finite training loss raises NumericError naming the epoch and batch.
std::vector<MetricsRecord> train_epochs(Network& net,
                                        const LabeledDataset& train,
                                        const LabeledDataset& eval,
                                        const TrainConfig& cfg,
                                        const Augmenter* aug = nullptr,
                                        bool verbose = false);

}  // namespace icnn
