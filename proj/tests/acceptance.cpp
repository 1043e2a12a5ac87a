// Acceptance gate: ten pass/fail criteria covering the numeric contracts,
// the accounting, determinism, and desk-scale training behavior. Prints one
// line per criterion; the exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "icnn/checks.hpp"
#include "icnn/data.hpp"
#include "icnn/error.hpp"
#include "icnn/model.hpp"
#include "icnn/run.hpp"

using namespace icnn;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

Outcome from_check(const CheckResult& r, double time_cap = 0.0) {
  Outcome o;
  o.pass = r.pass;
  o.detail = r.detail + " (" + fmt(r.seconds) + "s)";
  if (time_cap > 0.0 && r.seconds >= time_cap) {
    o.pass = false;
    o.detail += " exceeded " + fmt(time_cap) + "s budget";
  }
  return o;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValueError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// metrics.csv minus the wall_seconds column: wall time measures the machine,
// not the computation, and is the one legitimately varying field
std::string strip_wall_column(const std::string& csv) {
  std::string out;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    size_t cut = line.rfind(',');
    out += cut == std::string::npos ? line : line.substr(0, cut);
    out += '\n';
  }
  return out;
}

// IDX corpus directory for the training criteria: a real one from DATA_DIR
// when present, otherwise a procedurally drawn stand-in written once
const std::string& mnist_dir() {
  static std::string dir = [] {
    const char* env = std::getenv("DATA_DIR");
    if (env && std::filesystem::exists(std::string(env) +
                                       "/train-images-idx3-ubyte")) {
      std::fprintf(stderr, "  corpus: %s\n", env);
      return std::string(env);
    }
    std::string d = "/tmp/icnn-acceptance-mnist";
    std::filesystem::create_directories(d);
    if (!std::filesystem::exists(d + "/train-images-idx3-ubyte")) {
      write_idx(synthetic_digits(12000, 100), d + "/train-images-idx3-ubyte",
                d + "/train-labels-idx1-ubyte");
      write_idx(synthetic_digits(2000, 200), d + "/t10k-images-idx3-ubyte",
                d + "/t10k-labels-idx1-ubyte");
    }
    std::fprintf(stderr,
                 "  corpus: drawn stand-in at %s (DATA_DIR not set)\n",
                 d.c_str());
    return d;
  }();
  return dir;
}

RunConfig cnn4_run(const std::string& variant, uint64_t seed) {
  RunConfig rc;
  rc.model_path = std::string(ICNN_SOURCE_DIR) + "/configs/cnn4.json";
  rc.variant = variant;
  rc.data.name = "mnist";
  rc.data.dir = mnist_dir();
  rc.train.epochs = 5;
  rc.train.seed = seed;
  return rc;
}

Outcome xor_criterion() {
  double t0 = now_s();
  XorReport rep = run_xor(10, 5000, 0.1);
  double secs = now_s() - t0;
  Outcome o;
  o.pass = rep.ic_successes >= 8 && rep.std_successes == 0 &&
           rep.std_max_correct <= 3 && secs < 60.0;
  o.detail = "gated " + std::to_string(rep.ic_successes) +
             "/10 solved, plain best " +
             std::to_string(rep.std_max_correct) + "/4 (" + fmt(secs) + "s)";
  if (secs >= 60.0) o.detail += " exceeded 60s budget";
  return o;
}

Outcome convergence_criterion() {
  double t0 = now_s();
  const char* variants[3] = {"none", "layer", "block"};
  // [variant][seed]
  double first_loss[3][5], final_acc[3][5];
  for (int v = 0; v < 3; ++v)
    for (uint64_t seed = 1; seed <= 5; ++seed) {
      RunResult r = run_train(cnn4_run(variants[v], seed));
      first_loss[v][seed - 1] = r.metrics.front().train_loss;
      final_acc[v][seed - 1] = r.metrics.back().eval_acc;
      std::fprintf(stderr, "  %s seed %llu: epoch1 loss %.4f, final acc %.4f\n",
                   variants[v], (unsigned long long)seed,
                   first_loss[v][seed - 1], final_acc[v][seed - 1]);
    }
  double secs = now_s() - t0;

  int faster = 0;
  for (int s = 0; s < 5; ++s) faster += first_loss[1][s] < first_loss[0][s];
  double mean[3] = {0, 0, 0};
  for (int v = 0; v < 3; ++v) {
    for (int s = 0; s < 5; ++s) mean[v] += final_acc[v][s];
    mean[v] /= 5.0;
  }
  Outcome o;
  bool acc_ok = mean[1] >= mean[0] - 0.003 && mean[2] >= mean[0] - 0.003;
  o.pass = faster >= 3 && acc_ok && secs < 1800.0;
  o.detail = "epoch-1 loss lower in " + std::to_string(faster) +
             "/5 seeds; mean final acc base " + fmt(mean[0]) + ", layer " +
             fmt(mean[1]) + ", block " + fmt(mean[2]) + " (" + fmt(secs) +
             "s)";
  if (secs >= 1800.0) o.detail += " exceeded 30min budget";
  return o;
}

Outcome replay_criterion() {
  RunConfig rc = cnn4_run("block", 3);
  rc.data.train_subset = 2000;
  rc.data.eval_subset = 500;
  rc.train.epochs = 2;

  std::string d1 = "/tmp/icnn-acceptance-rep1";
  std::string d2 = "/tmp/icnn-acceptance-rep2";
  rc.out_dir = d1;
  run_train(rc);
  rc.out_dir = d2;
  run_train(rc);

  bool metrics_same = strip_wall_column(slurp(d1 + "/metrics.csv")) ==
                      strip_wall_column(slurp(d2 + "/metrics.csv"));
  bool params_same = slurp(d1 + "/params.bin") == slurp(d2 + "/params.bin");
  Outcome o;
  o.pass = metrics_same && params_same;
  o.detail = std::string("metrics ") +
             (metrics_same ? "identical" : "DIFFER") + ", params " +
             (params_same ? "identical" : "DIFFER") +
             " across repeated runs";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* label;
    Outcome (*run)();
  };
  const Criterion table[] = {
      {"gated dense forward equals its branch form",
       [] { return from_check(check_equivalence({}), 10.0); }},
      {"gated conv collapse and doubling limits",
       [] { return from_check(check_reduction({})); }},
      {"finite-difference gradient audit",
       [] { return from_check(check_gradcheck({}), 300.0); }},
      {"parameter and mac accounting grid",
       [] { return from_check(check_overhead_grid({})); }},
      {"gate angle monotonicity sweep",
       [] { return from_check(check_angle_sweep({}), 30.0); }},
      {"collision conservation and transmission",
       [] { return from_check(check_collision({})); }},
      {"xor separation, gated vs plain neuron", xor_criterion},
      {"cnn4 convergence direction", convergence_criterion},
      {"replay determinism", replay_criterion},
      {"variant shape preservation",
       [] { return from_check(check_shapes({})); }},
  };

  int failures = 0;
  for (size_t i = 0; i < sizeof(table) / sizeof(table[0]); ++i) {
    Outcome o;
    try {
      o = table[i].run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("criterion %2zu %-45s %s  %s\n", i + 1, table[i].label,
                o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures;
}
