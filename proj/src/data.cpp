#include "icnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "icnn/error.hpp"
#include "icnn/rng.hpp"

namespace icnn {
namespace {

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValueError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValueError("short write to " + path);
}

uint32_t read_be32(const std::vector<uint8_t>& b, size_t off,
                   const std::string& path) {
  if (off + 4 > b.size())
    throw ParseError(path + ": truncated at byte " + std::to_string(off));
  return (uint32_t(b[off]) << 24) | (uint32_t(b[off + 1]) << 16) |
         (uint32_t(b[off + 2]) << 8) | uint32_t(b[off + 3]);
}

void push_be32(std::vector<uint8_t>& b, uint32_t v) {
  b.push_back(uint8_t(v >> 24));
  b.push_back(uint8_t(v >> 16));
  b.push_back(uint8_t(v >> 8));
  b.push_back(uint8_t(v));
}

uint8_t to_byte(double v) {
  double s = std::lround(std::min(1.0, std::max(0.0, v)) * 255.0);
  return static_cast<uint8_t>(s);
}

}  // namespace

LabeledDataset xor_dataset() {
  LabeledDataset ds;
  ds.images = Tensor::from_data({4, 2, 1, 1}, {0, 0, 0, 1, 1, 0, 1, 1});
  ds.labels = {0, 1, 1, 0};
  ds.num_classes = 2;
  ds.name = "xor";
  return ds;
}

LabeledDataset load_idx(const std::string& images_path,
                        const std::string& labels_path) {
  auto ib = read_file(images_path);
  uint32_t imagic = read_be32(ib, 0, images_path);
  if (imagic != 0x00000803u) {
    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "%s: bad magic 0x%08x at byte 0 (want 0x00000803)",
                  images_path.c_str(), imagic);
    throw ParseError(msg);
  }
  uint32_t n = read_be32(ib, 4, images_path);
  uint32_t rows = read_be32(ib, 8, images_path);
  uint32_t cols = read_be32(ib, 12, images_path);
  size_t need = 16 + size_t(n) * rows * cols;
  if (ib.size() != need)
    throw ParseError(images_path + ": expected " + std::to_string(need) +
                     " bytes, got " + std::to_string(ib.size()) +
                     " (payload starts at byte 16)");

  auto lb = read_file(labels_path);
  uint32_t lmagic = read_be32(lb, 0, labels_path);
  if (lmagic != 0x00000801u) {
    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "%s: bad magic 0x%08x at byte 0 (want 0x00000801)",
                  labels_path.c_str(), lmagic);
    throw ParseError(msg);
  }
  uint32_t ln = read_be32(lb, 4, labels_path);
  if (ln != n)
    throw ParseError(labels_path + ": " + std::to_string(ln) +
                     " labels for " + std::to_string(n) + " images");
  if (lb.size() != 8 + size_t(ln))
    throw ParseError(labels_path + ": expected " + std::to_string(8 + ln) +
                     " bytes, got " + std::to_string(lb.size()));

  LabeledDataset ds;
  std::vector<double> vals(size_t(n) * rows * cols);
  for (size_t i = 0; i < vals.size(); ++i) vals[i] = ib[16 + i] / 255.0;
  ds.images = Tensor::from_data(
      {int64_t(n), 1, int64_t(rows), int64_t(cols)}, std::move(vals));
  ds.labels.resize(n);
  for (uint32_t i = 0; i < n; ++i) {
    uint8_t v = lb[8 + i];
    if (v > 9)
      throw ParseError(labels_path + ": label " + std::to_string(int(v)) +
                       " out of range at byte " + std::to_string(8 + i));
    ds.labels[i] = v;
  }
  ds.num_classes = 10;
  ds.name = "idx";
  return ds;
}

void write_idx(const LabeledDataset& ds, const std::string& images_path,
               const std::string& labels_path) {
  if (ds.images.ndim() != 4 || ds.images.dim(1) != 1)
    throw ValueError("write_idx wants [N,1,H,W], got " +
                     shape_str(ds.images.shape()));
  int64_t n = ds.images.dim(0), h = ds.images.dim(2), w = ds.images.dim(3);
  if (int64_t(ds.labels.size()) != n)
    throw ValueError("write_idx: label count mismatch");

  std::vector<uint8_t> ib;
  ib.reserve(16 + size_t(n) * h * w);
  push_be32(ib, 0x00000803u);
  push_be32(ib, uint32_t(n));
  push_be32(ib, uint32_t(h));
  push_be32(ib, uint32_t(w));
  for (double v : ds.images.values()) ib.push_back(to_byte(v));
  write_file(images_path, ib);

  std::vector<uint8_t> lb;
  lb.reserve(8 + size_t(n));
  push_be32(lb, 0x00000801u);
  push_be32(lb, uint32_t(n));
  for (int v : ds.labels) lb.push_back(uint8_t(v));
  write_file(labels_path, lb);
}

LabeledDataset load_cifar10_bin(const std::vector<std::string>& paths) {
  constexpr size_t kRecord = 1 + 3 * 32 * 32;
  std::vector<double> vals;
  std::vector<int> labels;
  for (const auto& path : paths) {
    auto b = read_file(path);
    if (b.size() % kRecord != 0)
      throw ParseError(path + ": size " + std::to_string(b.size()) +
                       " is not a multiple of " + std::to_string(kRecord));
    size_t count = b.size() / kRecord;
    for (size_t r = 0; r < count; ++r) {
      size_t off = r * kRecord;
      uint8_t lab = b[off];
      if (lab > 9)
        throw ParseError(path + ": label " + std::to_string(int(lab)) +
                         " out of range at byte " + std::to_string(off));
      labels.push_back(lab);
      for (size_t i = 1; i < kRecord; ++i)
        vals.push_back(b[off + i] / 255.0);
    }
  }
  if (labels.empty()) throw ParseError("no records in cifar10 input");
  LabeledDataset ds;
  ds.images = Tensor::from_data({int64_t(labels.size()), 3, 32, 32},
                                std::move(vals));
  ds.labels = std::move(labels);
  ds.num_classes = 10;
  ds.name = "cifar10";
  return ds;
}

void write_cifar10_bin(const LabeledDataset& ds, const std::string& path) {
  if (ds.images.ndim() != 4 || ds.images.dim(1) != 3 ||
      ds.images.dim(2) != 32 || ds.images.dim(3) != 32)
    throw ValueError("write_cifar10_bin wants [N,3,32,32], got " +
                     shape_str(ds.images.shape()));
  int64_t n = ds.images.dim(0);
  std::vector<uint8_t> b;
  b.reserve(size_t(n) * 3073);
  const auto& vals = ds.images.values();
  for (int64_t i = 0; i < n; ++i) {
    b.push_back(uint8_t(ds.labels[size_t(i)]));
    const double* px = vals.data() + i * 3 * 32 * 32;
    for (int64_t j = 0; j < 3 * 32 * 32; ++j) b.push_back(to_byte(px[j]));
  }
  write_file(path, b);
}

std::pair<std::vector<double>, std::vector<double>> compute_mean_std(
    const LabeledDataset& ds) {
  int64_t n = ds.images.dim(0), c = ds.images.dim(1);
  int64_t plane = ds.images.dim(2) * ds.images.dim(3);
  std::vector<double> mean(size_t(c), 0.0), sq(size_t(c), 0.0);
  const auto& v = ds.images.values();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      const double* p = v.data() + (i * c + ch) * plane;
      for (int64_t k = 0; k < plane; ++k) {
        mean[size_t(ch)] += p[k];
        sq[size_t(ch)] += p[k] * p[k];
      }
    }
  double count = double(n) * double(plane);
  std::vector<double> sd(static_cast<size_t>(c));
  for (int64_t ch = 0; ch < c; ++ch) {
    mean[size_t(ch)] /= count;
    double var = sq[size_t(ch)] / count - mean[size_t(ch)] * mean[size_t(ch)];
    sd[size_t(ch)] = std::sqrt(std::max(0.0, var));
  }
  return {mean, sd};
}

namespace {

LabeledDataset affine_pixels(const LabeledDataset& ds,
                             const std::vector<double>& mean,
                             const std::vector<double>& std, bool forward) {
  int64_t c = ds.images.dim(1);
  if (int64_t(mean.size()) != c || int64_t(std.size()) != c)
    throw ValueError("mean/std must have one entry per channel");
  for (double s : std)
    if (!(s > 0.0)) throw ValueError("non-positive std in normalization");
  int64_t n = ds.images.dim(0);
  int64_t plane = ds.images.dim(2) * ds.images.dim(3);
  std::vector<double> out(ds.images.values());
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      double* p = out.data() + (i * c + ch) * plane;
      double m = mean[size_t(ch)], s = std[size_t(ch)];
      for (int64_t k = 0; k < plane; ++k)
        p[k] = forward ? (p[k] - m) / s : p[k] * s + m;
    }
  LabeledDataset r = ds;
  r.images = Tensor::from_data(ds.images.shape(), std::move(out));
  return r;
}

}  // namespace

LabeledDataset normalize(const LabeledDataset& ds,
                         const std::vector<double>& mean,
                         const std::vector<double>& std) {
  return affine_pixels(ds, mean, std, true);
}

LabeledDataset denormalize(const LabeledDataset& ds,
                           const std::vector<double>& mean,
                           const std::vector<double>& std) {
  return affine_pixels(ds, mean, std, false);
}

LabeledDataset subset(const LabeledDataset& ds, int64_t k) {
  if (k <= 0 || k >= ds.size()) return ds;
  int64_t per = ds.images.numel() / ds.size();
  std::vector<double> vals(ds.images.values().begin(),
                           ds.images.values().begin() + k * per);
  Shape shape = ds.images.shape();
  shape[0] = k;
  LabeledDataset r;
  r.images = Tensor::from_data(shape, std::move(vals));
  r.labels.assign(ds.labels.begin(), ds.labels.begin() + k);
  r.num_classes = ds.num_classes;
  r.name = ds.name;
  return r;
}

void Augmenter::apply(std::vector<double>& sample, int64_t c, int64_t h,
                      int64_t w, int64_t epoch, int64_t index) const {
  if (!active()) return;
  Rng rng(derive_seed(seed, 0xA06u ^ uint64_t(epoch), uint64_t(index)));
  if (pad > 0) {
    // crop offset inside the zero-padded frame; (pad,pad) is the identity
    int64_t dy = int64_t(rng.below(uint64_t(2 * pad + 1)));
    int64_t dx = int64_t(rng.below(uint64_t(2 * pad + 1)));
    std::vector<double> out(sample.size(), 0.0);
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t y = 0; y < h; ++y) {
        int64_t sy = y + dy - pad;
        if (sy < 0 || sy >= h) continue;
        for (int64_t x = 0; x < w; ++x) {
          int64_t sx = x + dx - pad;
          if (sx < 0 || sx >= w) continue;
          out[size_t((ch * h + y) * w + x)] =
              sample[size_t((ch * h + sy) * w + sx)];
        }
      }
    sample.swap(out);
  }
  if (flip_prob > 0.0 && rng.uniform() < flip_prob) {
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t y = 0; y < h; ++y) {
        double* row = sample.data() + (ch * h + y) * w;
        std::reverse(row, row + w);
      }
  }
}

namespace {

// 7x5 glyph bitmaps, row-major, one string per digit
const char* const kGlyphs[10] = {
    "01110" "10001" "10001" "10001" "10001" "10001" "01110",
    "00100" "01100" "00100" "00100" "00100" "00100" "01110",
    "01110" "10001" "00001" "00010" "00100" "01000" "11111",
    "11110" "00001" "00001" "01110" "00001" "00001" "11110",
    "00010" "00110" "01010" "10010" "11111" "00010" "00010",
    "11111" "10000" "11110" "00001" "00001" "10001" "01110",
    "00110" "01000" "10000" "11110" "10001" "10001" "01110",
    "11111" "00001" "00010" "00100" "01000" "01000" "01000",
    "01110" "10001" "10001" "01110" "10001" "10001" "01110",
    "01110" "10001" "10001" "01111" "00001" "00010" "01100",
};

}  // namespace

LabeledDataset synthetic_digits(int64_t n, uint64_t seed) {
  if (n <= 0) throw ValueError("synthetic_digits needs n > 0");
  constexpr int64_t kH = 28, kW = 28, kScale = 3;
  constexpr int64_t kGh = 7 * kScale, kGw = 5 * kScale;  // 21 x 15
  std::vector<double> vals(size_t(n) * kH * kW, 0.0);
  std::vector<int> labels(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, 0xD161u, uint64_t(i)));
    int digit = int(rng.below(10));
    labels[size_t(i)] = digit;
    int64_t oy = (kH - kGh) / 2 - 2 + int64_t(rng.below(5));
    int64_t ox = (kW - kGw) / 2 - 3 + int64_t(rng.below(7));
    double gain = 0.7 + 0.3 * rng.uniform();
    double* img = vals.data() + i * kH * kW;
    for (int64_t gy = 0; gy < kGh; ++gy)
      for (int64_t gx = 0; gx < kGw; ++gx) {
        if (kGlyphs[digit][(gy / kScale) * 5 + gx / kScale] != '1') continue;
        img[(oy + gy) * kW + ox + gx] = gain;
      }
    for (int64_t p = 0; p < kH * kW; ++p) {
      double v = img[p] + 0.05 * rng.normal();
      img[p] = std::min(1.0, std::max(0.0, v));
    }
  }
  LabeledDataset ds;
  ds.images = Tensor::from_data({n, 1, kH, kW}, std::move(vals));
  ds.labels = std::move(labels);
  ds.num_classes = 10;
  ds.name = "synthetic";
  return ds;
}

}  // namespace icnn
