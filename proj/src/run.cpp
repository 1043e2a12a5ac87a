#include "icnn/run.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "icnn/error.hpp"
#include "icnn/ic.hpp"
#include "icnn/rng.hpp"
#include "json.hpp"

namespace icnn {
namespace {

using nlohmann::json;

LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.size() == 0) return b;
  std::vector<double> vals = a.images.values();
  vals.insert(vals.end(), b.images.values().begin(), b.images.values().end());
  Shape shape = a.images.shape();
  shape[0] += b.images.dim(0);
  LabeledDataset r = a;
  r.images = Tensor::from_data(shape, std::move(vals));
  r.labels.insert(r.labels.end(), b.labels.begin(), b.labels.end());
  return r;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void put_u32(std::vector<uint8_t>& b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(uint8_t(v >> (8 * i)));
}
void put_u64(std::vector<uint8_t>& b, uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(uint8_t(v >> (8 * i)));
}
void put_f64(std::vector<uint8_t>& b, double d) {
  uint64_t u;
  std::memcpy(&u, &d, 8);
  put_u64(b, u);
}
uint32_t get_u32(const std::vector<uint8_t>& b, size_t& off) {
  if (off + 4 > b.size()) throw ParseError("params file truncated");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(b[off + size_t(i)]) << (8 * i);
  off += 4;
  return v;
}
uint64_t get_u64(const std::vector<uint8_t>& b, size_t& off) {
  if (off + 8 > b.size()) throw ParseError("params file truncated");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(b[off + size_t(i)]) << (8 * i);
  off += 8;
  return v;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValueError("cannot write " + path);
  out << text;
}

}  // namespace

DataBundle load_data(const DataConfig& cfg) {
  DataBundle b;
  if (cfg.name == "xor") {
    b.train = xor_dataset();
    b.eval = b.train;
    return b;
  }
  if (cfg.dir.empty())
    throw ValueError(
        "missing dataset path: pass --data-dir or set DATA_DIR");
  int64_t tsub =
      cfg.full ? 0 : (cfg.train_subset < 0 ? 10000 : cfg.train_subset);
  int64_t esub =
      cfg.full ? 0 : (cfg.eval_subset < 0 ? 2000 : cfg.eval_subset);
  if (cfg.name == "mnist") {
    b.train = load_idx(cfg.dir + "/train-images-idx3-ubyte",
                       cfg.dir + "/train-labels-idx1-ubyte");
    b.eval = load_idx(cfg.dir + "/t10k-images-idx3-ubyte",
                      cfg.dir + "/t10k-labels-idx1-ubyte");
  } else if (cfg.name == "cifar10") {
    LabeledDataset train;
    for (int i = 1; i <= 5; ++i) {
      auto part = load_cifar10_bin(
          {cfg.dir + "/data_batch_" + std::to_string(i) + ".bin"});
      train = concat(train, part);
      if (tsub > 0 && train.size() >= tsub) break;
    }
    b.train = train;
    b.eval = load_cifar10_bin({cfg.dir + "/test_batch.bin"});
    b.aug.pad = 4;
    b.aug.flip_prob = 0.5;
  } else {
    throw ValueError("unknown dataset: " + cfg.name);
  }
  b.train = subset(b.train, tsub);
  b.eval = subset(b.eval, esub);
  auto [mean, stdev] = compute_mean_std(b.train);
  b.mean = mean;
  b.stdev = stdev;
  b.train = normalize(b.train, mean, stdev);
  b.eval = normalize(b.eval, mean, stdev);
  if (cfg.aug_pad >= 0) b.aug.pad = cfg.aug_pad;
  if (cfg.aug_flip >= 0) b.aug.flip_prob = cfg.aug_flip;
  return b;
}

ModelSpec resolve_variant(const ModelSpec& base, const std::string& variant) {
  if (variant == "none") return base;
  PairedVariants pv = paired_variants(base);
  if (variant == "layer") return pv.ic_layer;
  if (variant == "block") return pv.ic_block;
  throw ValueError("variant must be none, layer, or block (got " + variant +
                   ")");
}

std::string metrics_csv(const std::vector<MetricsRecord>& records) {
  std::string out =
      "epoch,lr,train_loss,train_acc,eval_loss,eval_acc,wall_seconds\n";
  for (const auto& r : records) {
    out += std::to_string(r.epoch);
    out += ',';
    out += fmt17(r.lr);
    out += ',';
    out += fmt17(r.train_loss);
    out += ',';
    out += fmt17(r.train_acc);
    out += ',';
    out += fmt17(r.eval_loss);
    out += ',';
    out += fmt17(r.eval_acc);
    out += ',';
    out += fmt17(r.wall_seconds);
    out += '\n';
  }
  return out;
}

void write_params_bin(const std::string& path,
                      const std::vector<ParamRef>& params) {
  std::vector<uint8_t> b;
  b.push_back('I');
  b.push_back('C');
  b.push_back('N');
  b.push_back('P');
  put_u32(b, 1);
  put_u32(b, uint32_t(params.size()));
  for (const auto& p : params) {
    put_u32(b, uint32_t(p.name.size()));
    b.insert(b.end(), p.name.begin(), p.name.end());
    put_u32(b, uint32_t(p.tensor.ndim()));
    for (int64_t d : p.tensor.shape()) put_u64(b, uint64_t(d));
    for (double v : p.tensor.values()) put_f64(b, v);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValueError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(b.data()),
            std::streamsize(b.size()));
}

std::vector<std::pair<std::string, Tensor>> read_params_bin(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<uint8_t> b((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  size_t off = 0;
  if (b.size() < 4 || b[0] != 'I' || b[1] != 'C' || b[2] != 'N' ||
      b[3] != 'P')
    throw ParseError(path + ": bad magic at byte 0 (want ICNP)");
  off = 4;
  uint32_t version = get_u32(b, off);
  if (version != 1)
    throw ParseError(path + ": unsupported version " +
                     std::to_string(version));
  uint32_t count = get_u32(b, off);
  std::vector<std::pair<std::string, Tensor>> out;
  out.reserve(count);
  for (uint32_t t = 0; t < count; ++t) {
    uint32_t nlen = get_u32(b, off);
    if (off + nlen > b.size()) throw ParseError(path + ": truncated name");
    std::string name(b.begin() + std::ptrdiff_t(off),
                     b.begin() + std::ptrdiff_t(off + nlen));
    off += nlen;
    uint32_t rank = get_u32(b, off);
    Shape shape(rank);
    for (uint32_t i = 0; i < rank; ++i)
      shape[i] = int64_t(get_u64(b, off));
    int64_t n = shape_numel(shape);
    std::vector<double> vals(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      uint64_t u = get_u64(b, off);
      std::memcpy(&vals[size_t(i)], &u, 8);
    }
    out.emplace_back(name, Tensor::from_data(shape, std::move(vals)));
  }
  if (off != b.size())
    throw ParseError(path + ": trailing bytes at " + std::to_string(off));
  return out;
}

std::string manifest_json(const RunConfig& cfg, const ModelSpec& resolved) {
  json m;
  m["format"] = 1;
  m["command"] = "train";
  m["argv"] = cfg.argv;
  m["variant"] = cfg.variant;
  m["model_path"] = cfg.model_path;
  m["model"] = json::parse(resolved.to_json_text());
  m["data"] = {{"name", cfg.data.name},
               {"dir", cfg.data.dir},
               {"train_subset", cfg.data.train_subset},
               {"eval_subset", cfg.data.eval_subset},
               {"full", cfg.data.full},
               {"aug_pad", cfg.data.aug_pad},
               {"aug_flip", cfg.data.aug_flip}};
  m["train"] = {{"lr0", cfg.train.lr0},
                {"momentum", cfg.train.momentum},
                {"weight_decay", cfg.train.weight_decay},
                {"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"lr_drop_every", cfg.train.lr_drop_every},
                {"lr_drop_factor", cfg.train.lr_drop_factor},
                {"seed", cfg.train.seed},
                {"decay_exempt_norm_gate", cfg.train.decay_exempt_norm_gate}};
  return m.dump(2) + "\n";
}

RunConfig config_from_manifest_text(const std::string& text) {
  json m;
  try {
    m = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  try {
    RunConfig rc;
    rc.spec_text = m.at("model").dump();
    rc.variant = "none";  // embedded model already has the variant applied
    rc.model_path = m.value("model_path", std::string());
    const json& d = m.at("data");
    rc.data.name = d.at("name").get<std::string>();
    rc.data.dir = d.at("dir").get<std::string>();
    rc.data.train_subset = d.at("train_subset").get<int64_t>();
    rc.data.eval_subset = d.at("eval_subset").get<int64_t>();
    rc.data.full = d.at("full").get<bool>();
    rc.data.aug_pad = d.at("aug_pad").get<int64_t>();
    rc.data.aug_flip = d.at("aug_flip").get<double>();
    const json& t = m.at("train");
    rc.train.lr0 = t.at("lr0").get<double>();
    rc.train.momentum = t.at("momentum").get<double>();
    rc.train.weight_decay = t.at("weight_decay").get<double>();
    rc.train.epochs = t.at("epochs").get<int64_t>();
    rc.train.batch_size = t.at("batch_size").get<int64_t>();
    rc.train.lr_drop_every = t.at("lr_drop_every").get<int64_t>();
    rc.train.lr_drop_factor = t.at("lr_drop_factor").get<double>();
    rc.train.seed = t.at("seed").get<uint64_t>();
    rc.train.decay_exempt_norm_gate =
        t.at("decay_exempt_norm_gate").get<bool>();
    return rc;
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
}

RunResult run_train(const RunConfig& cfg) {
  cfg.train.validate();
  ModelSpec base = cfg.spec_text.empty()
                       ? ModelSpec::from_json_file(cfg.model_path)
                       : ModelSpec::from_json_text(cfg.spec_text);
  ModelSpec resolved = resolve_variant(base, cfg.variant);
  DataBundle data = load_data(cfg.data);

  int64_t per_sample = data.train.images.numel() / data.train.size();
  if (resolved.input.size() == 3) {
    Shape want = {data.train.images.dim(1), data.train.images.dim(2),
                  data.train.images.dim(3)};
    if (resolved.input != want)
      throw ValueError("model expects input " + shape_str(resolved.input) +
                       " but dataset provides " + shape_str(want));
  } else if (shape_numel(resolved.input) != per_sample) {
    throw ValueError("model input size " +
                     std::to_string(shape_numel(resolved.input)) +
                     " does not match sample size " +
                     std::to_string(per_sample));
  }

  RunResult res;
  res.spec = resolved;
  res.net = std::make_shared<Network>(build_model(resolved, cfg.train.seed));
  res.param_count = count_params(*res.net).total_params;
  res.total_macs = count_costs(*res.net, resolved.input).total_macs;

  Augmenter aug = data.aug;
  aug.seed = cfg.train.seed;
  res.metrics = train_epochs(*res.net, data.train, data.eval, cfg.train,
                             aug.active() ? &aug : nullptr, cfg.verbose);

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    write_text(cfg.out_dir + "/manifest.json", manifest_json(cfg, resolved));
    write_text(cfg.out_dir + "/metrics.csv", metrics_csv(res.metrics));
    json s;
    s["name"] = resolved.name;
    s["variant"] = cfg.variant;
    s["dataset"] = cfg.data.name;
    s["epochs"] = cfg.train.epochs;
    s["seed"] = cfg.train.seed;
    s["params"] = res.param_count;
    s["macs"] = res.total_macs;
    s["flops"] = 2 * res.total_macs;
    double wall = 0.0;
    for (const auto& r : res.metrics) wall += r.wall_seconds;
    s["wall_seconds_total"] = wall;
    if (!res.metrics.empty()) {
      const auto& last = res.metrics.back();
      s["final_train_loss"] = last.train_loss;
      s["final_train_acc"] = last.train_acc;
      s["final_eval_loss"] = last.eval_loss;
      s["final_eval_acc"] = last.eval_acc;
    }
    write_text(cfg.out_dir + "/summary.json", s.dump(2) + "\n");
    write_params_bin(cfg.out_dir + "/params.bin", res.net->params());
  }
  return res;
}

RunResult run_manifest_file(const std::string& path,
                            const std::string& out_dir) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  RunConfig rc = config_from_manifest_text(text);
  rc.out_dir = out_dir;
  return run_train(rc);
}

XorReport run_xor(int64_t seeds, int64_t steps, double lr) {
  if (seeds <= 0) throw ValueError("need at least one seed");
  if (steps <= 0) throw ValueError("need at least one step");
  XorReport rep;
  rep.seeds = seeds;
  rep.steps = steps;
  rep.lr = lr;

  Tensor x = Tensor::from_data({4, 2}, {0, 0, 0, 1, 1, 0, 1, 1});
  // positive class is XOR-false so one gated unit can carve it out
  Tensor target = Tensor::from_data({4, 1}, {1, 0, 0, 1});
  const auto& tv = target.values();

  auto correct4 = [&](const std::vector<double>& y) {
    int c = 0;
    for (int i = 0; i < 4; ++i)
      if ((y[size_t(i)] > 0.5) == (tv[size_t(i)] > 0.5)) ++c;
    return c;
  };
  auto gd_step = [&](std::vector<Tensor>& params) {
    for (auto& p : params) {
      if (!p.has_grad()) continue;
      auto& vals = p.mutable_values();
      const auto& g = p.grad();
      for (size_t j = 0; j < vals.size(); ++j) vals[j] -= lr * g[j];
      p.zero_grad();
    }
  };

  for (int64_t seed = 0; seed < seeds; ++seed) {
    Rng gr(derive_seed(uint64_t(seed), 0x1C0Au));
    Tensor W = Tensor::from_data({1, 2}, {0.7 * gr.normal(),
                                          0.7 * gr.normal()});
    Tensor wp = Tensor::from_data({1}, {1.0});
    Tensor b1 = Tensor::from_data({1}, {0.0});
    Tensor b2 = Tensor::from_data({1}, {0.8 + 0.25 * gr.normal()});
    for (Tensor* t : {&W, &wp, &b1, &b2}) t->set_requires_grad(true);
    ICDenseParams p;
    p.weight = W;
    p.w_prime = wp;
    p.bias_main = b1;
    p.bias_inner = b2;
    std::vector<Tensor> gparams = {W, wp, b1, b2};

    int64_t solved_at = -1;
    for (int64_t step = 0; step < steps; ++step) {
      Tensor y = ic_dense_forward(x, p, Activation::identity);
      if (correct4(y.values()) == 4) {
        solved_at = step;
        break;
      }
      Tensor d = sub(y, target);
      Tensor loss = mean(mul(d, d));
      loss.backward();
      gd_step(gparams);
    }
    rep.ic_solve_step.push_back(solved_at);
    if (solved_at >= 0) {
      ++rep.ic_successes;
      rep.have_neuron = true;
      rep.w1 = W.values()[0];
      rep.w2 = W.values()[1];
      rep.b1 = b1.values()[0];
      rep.b2 = b2.values()[0];
      rep.wp = wp.values()[0];
    }

    Rng sr(derive_seed(uint64_t(seed), 0x57D0u));
    Tensor sW = Tensor::from_data({1, 2}, {0.7 * sr.normal(),
                                           0.7 * sr.normal()});
    Tensor sb = Tensor::from_data({1}, {0.0});
    sW.set_requires_grad(true);
    sb.set_requires_grad(true);
    std::vector<Tensor> sparams = {sW, sb};
    bool std_solved = false;
    for (int64_t step = 0; step < steps; ++step) {
      Tensor y = relu(add_row_bias(matmul(x, sW, false, true), sb));
      int c = correct4(y.values());
      rep.std_max_correct = std::max(rep.std_max_correct, c);
      if (c == 4) {
        std_solved = true;
        break;
      }
      Tensor d = sub(y, target);
      Tensor loss = mean(mul(d, d));
      loss.backward();
      gd_step(sparams);
    }
    if (std_solved) ++rep.std_successes;
  }
  return rep;
}

}  // namespace icnn
