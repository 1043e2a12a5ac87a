#include "icnn/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "icnn/error.hpp"
#include "icnn/ops.hpp"
#include "icnn/rng.hpp"

namespace icnn {

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ValueError("lr0 must be positive");
  if (momentum < 0.0 || momentum >= 1.0)
    throw ValueError("momentum must be in [0,1)");
  if (weight_decay < 0.0) throw ValueError("weight_decay must be >= 0");
  if (epochs < 0) throw ValueError("epochs must be >= 0");
  if (batch_size <= 0) throw ValueError("batch_size must be positive");
  if (lr_drop_every < 0) throw ValueError("lr_drop_every must be >= 0");
  if (!(lr_drop_factor > 0.0))
    throw ValueError("lr_drop_factor must be positive");
}

double lr_at(int64_t epoch, const TrainConfig& cfg) {
  if (cfg.lr_drop_every <= 0) return cfg.lr0;
  return cfg.lr0 * std::pow(cfg.lr_drop_factor,
                            double(epoch / cfg.lr_drop_every));
}

void sgd_step(std::vector<ParamRef>& params,
              std::vector<std::vector<double>>& velocity,
              const TrainConfig& cfg, double lr) {
  if (velocity.size() != params.size()) {
    velocity.assign(params.size(), {});
    for (size_t i = 0; i < params.size(); ++i)
      velocity[i].assign(size_t(params[i].tensor.numel()), 0.0);
  }
  for (size_t i = 0; i < params.size(); ++i) {
    ParamRef& ref = params[i];
    if (!ref.tensor.has_grad()) continue;
    double wd = (cfg.decay_exempt_norm_gate && ref.norm_or_gate)
                    ? 0.0
                    : cfg.weight_decay;
    auto& p = ref.tensor.mutable_values();
    const auto& g = ref.tensor.grad();
    auto& v = velocity[i];
    for (size_t j = 0; j < p.size(); ++j) {
      double step = g[j] + wd * p[j];
      v[j] = cfg.momentum * v[j] + step;
      p[j] -= lr * v[j];
    }
    ref.tensor.zero_grad();
  }
}

namespace {

Tensor gather_batch(const LabeledDataset& ds, const std::vector<int64_t>& idx,
                    int64_t begin, int64_t end, const Augmenter* aug,
                    int64_t epoch) {
  int64_t per = ds.images.numel() / ds.size();
  Shape shape = ds.images.shape();
  shape[0] = end - begin;
  std::vector<double> vals(size_t((end - begin) * per));
  const auto& src = ds.images.values();
  int64_t c = ds.images.dim(1), h = ds.images.dim(2), w = ds.images.dim(3);
  for (int64_t b = begin; b < end; ++b) {
    int64_t i = idx[size_t(b)];
    std::vector<double> sample(src.begin() + i * per,
                               src.begin() + (i + 1) * per);
    if (aug && aug->active()) aug->apply(sample, c, h, w, epoch, i);
    std::copy(sample.begin(), sample.end(),
              vals.begin() + (b - begin) * per);
  }
  return Tensor::from_data(shape, std::move(vals));
}

std::vector<int> gather_labels(const LabeledDataset& ds,
                               const std::vector<int64_t>& idx, int64_t begin,
                               int64_t end) {
  std::vector<int> out(size_t(end - begin));
  for (int64_t b = begin; b < end; ++b)
    out[size_t(b - begin)] = ds.labels[size_t(idx[size_t(b)])];
  return out;
}

int64_t count_correct(const Tensor& logits, const std::vector<int>& labels) {
  auto pred = argmax_rows(logits);
  int64_t correct = 0;
  for (size_t i = 0; i < labels.size(); ++i)
    if (pred[i] == labels[i]) ++correct;
  return correct;
}

}  // namespace

std::pair<double, double> evaluate(Network& net, const LabeledDataset& ds,
                                   int64_t batch_size) {
  if (ds.size() == 0) throw ValueError("evaluate on empty dataset");
  net.set_training(false);
  NoGrad guard;
  std::vector<int64_t> idx(size_t(ds.size()));
  std::iota(idx.begin(), idx.end(), 0);
  double loss_sum = 0.0;
  int64_t correct = 0;
  for (int64_t begin = 0; begin < ds.size(); begin += batch_size) {
    int64_t end = std::min(ds.size(), begin + batch_size);
    Tensor x = gather_batch(ds, idx, begin, end, nullptr, 0);
    auto labels = gather_labels(ds, idx, begin, end);
    Tensor logits = net.forward(x);
    Tensor loss = softmax_cross_entropy(logits, labels);
    loss_sum += loss.item() * double(end - begin);
    correct += count_correct(logits, labels);
  }
  return {loss_sum / double(ds.size()), double(correct) / double(ds.size())};
}

std::vector<MetricsRecord> train_epochs(Network& net,
                                        const LabeledDataset& train,
                                        const LabeledDataset& eval,
                                        const TrainConfig& cfg,
                                        const Augmenter* aug, bool verbose) {
  cfg.validate();
  if (train.size() == 0) throw ValueError("empty training set");
  auto params = net.params();
  std::vector<std::vector<double>> velocity;
  std::vector<MetricsRecord> records;
  std::vector<int64_t> idx(size_t(train.size()));

  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    double lr = lr_at(epoch, cfg);
    std::iota(idx.begin(), idx.end(), 0);
    Rng shuffle_rng(derive_seed(cfg.seed, 0x5FFEu, uint64_t(epoch)));
    for (size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[size_t(shuffle_rng.below(i))]);

    net.set_training(true);
    double loss_sum = 0.0;
    int64_t correct = 0, batch_no = 0;
    for (int64_t begin = 0; begin < train.size();
         begin += cfg.batch_size, ++batch_no) {
      int64_t end = std::min(train.size(), begin + cfg.batch_size);
      Tensor x = gather_batch(train, idx, begin, end, aug, epoch);
      auto labels = gather_labels(train, idx, begin, end);
      Tensor logits = net.forward(x);
      Tensor loss = softmax_cross_entropy(logits, labels);
      double lval = loss.item();
      if (!std::isfinite(lval))
        throw NumericError("non-finite loss at epoch " +
                           std::to_string(epoch + 1) + " batch " +
                           std::to_string(batch_no + 1));
      loss_sum += lval * double(end - begin);
      correct += count_correct(logits, labels);
      loss.backward();
      sgd_step(params, velocity, cfg, lr);
    }

    MetricsRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    rec.train_loss = loss_sum / double(train.size());
    rec.train_acc = double(correct) / double(train.size());
    if (eval.size() > 0) {
      auto [el, ea] = evaluate(net, eval, cfg.batch_size);
      rec.eval_loss = el;
      rec.eval_acc = ea;
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (verbose)
      std::fprintf(stderr,
                   "epoch %3lld  lr %.5f  train %.4f/%.4f  eval %.4f/%.4f  "
                   "%.1fs\n",
                   (long long)rec.epoch, rec.lr, rec.train_loss,
                   rec.train_acc, rec.eval_loss, rec.eval_acc,
                   rec.wall_seconds);
    records.push_back(rec);
  }
  return records;
}

}  // namespace icnn
