#include "pea/data.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

#include "pea/errors.hpp"

namespace pea {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const char* field) {
  if (bytes.size() < offset + 4) throw ParseError(std::string("truncated IDX header reading ") + field, offset);
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void check_magic(std::uint32_t got, std::uint32_t want) {
  if (got != want) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "bad IDX magic 0x%08x (expected 0x%08x)", got, want);
    throw ParseError(buf, 0);
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

Normalization identity_normalization(std::size_t channels) {
  return {std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0)};
}

}  // namespace

void Dataset::validate() const {
  if (images.rank() != 4) throw DimensionError("dataset images must be [N, C, H, W], got " + to_string(images.shape()));
  if (images.dim(0) != labels.size()) {
    throw DimensionError("dataset has " + std::to_string(images.dim(0)) + " images but " +
                         std::to_string(labels.size()) + " labels");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
      throw ContractError("label " + std::to_string(l) + " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
  check_magic(read_be32(bytes, 0, "magic"), kImageMagic);
  IdxImages out;
  out.count = read_be32(bytes, 4, "image count");
  out.rows = read_be32(bytes, 8, "rows");
  out.cols = read_be32(bytes, 12, "cols");
  std::size_t need = 0;
  const bool overflow = __builtin_mul_overflow(out.count, out.rows, &need) || __builtin_mul_overflow(need, out.cols, &need);
  if (overflow || bytes.size() - 16 < need) {
    throw ParseError("truncated IDX image payload: header declares " + std::to_string(need) + " bytes, found " +
                         std::to_string(bytes.size() - 16),
                     bytes.size());
  }
  out.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(need));
  return out;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  check_magic(read_be32(bytes, 0, "magic"), kLabelMagic);
  const std::size_t n = read_be32(bytes, 4, "label count");
  if (bytes.size() - 8 < n) {
    throw ParseError("truncated IDX label payload: header declares " + std::to_string(n) + " labels, found " +
                         std::to_string(bytes.size() - 8),
                     bytes.size());
  }
  return {bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(n)};
}

std::vector<std::uint8_t> encode_idx_images(const IdxImages& images) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + images.pixels.size());
  write_be32(out, kImageMagic);
  write_be32(out, static_cast<std::uint32_t>(images.count));
  write_be32(out, static_cast<std::uint32_t>(images.rows));
  write_be32(out, static_cast<std::uint32_t>(images.cols));
  out.insert(out.end(), images.pixels.begin(), images.pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> out;
  write_be32(out, kLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 const Normalization* stats, Split split) {
  const auto image_bytes = read_file(images_path);
  const auto label_bytes = read_file(labels_path);
  const IdxImages raw = parse_idx_images(image_bytes);
  const auto labels = parse_idx_labels(label_bytes);
  if (labels.size() != raw.count) {
    throw ParseError("label count " + std::to_string(labels.size()) + " does not match image count " +
                         std::to_string(raw.count),
                     4);
  }
  if (raw.count == 0 || raw.rows == 0 || raw.cols == 0) throw ParseError("empty IDX image file", 4);

  std::vector<float> pixels(raw.pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<float>(raw.pixels[i] / 255.0);
  Tensor images({raw.count, 1, raw.rows, raw.cols}, std::move(pixels));

  Dataset d;
  d.split = split;
  d.normalization = stats ? *stats : compute_normalization(images);
  if (d.normalization.mean.size() != 1) throw DimensionError("normalization channel count does not match IDX data");
  d.images = normalize(images, d.normalization);
  d.labels.assign(labels.begin(), labels.end());
  int max_label = 0;
  for (int l : d.labels) max_label = std::max(max_label, l);
  d.num_classes = static_cast<std::size_t>(max_label) + 1;
  return d;
}

void save_idx(const Dataset& data, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path) {
  data.validate();
  if (data.channels() != 1) throw DimensionError("IDX export supports single-channel images only");
  const Tensor raw = denormalize(data.images, data.normalization);
  IdxImages out;
  out.count = data.size();
  out.rows = data.height();
  out.cols = data.width();
  out.pixels.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = std::round(static_cast<double>(raw[i]) * 255.0);
    out.pixels[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
  }
  std::vector<std::uint8_t> labels(data.labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (data.labels[i] > 255) throw ContractError("IDX labels are limited to 0..255");
    labels[i] = static_cast<std::uint8_t>(data.labels[i]);
  }
  write_file(images_path, encode_idx_images(out));
  write_file(labels_path, encode_idx_labels(labels));
}

Normalization compute_normalization(const Tensor& images) {
  if (images.rank() != 4) throw DimensionError("normalization expects [N, C, H, W]");
  const std::size_t n = images.dim(0), c = images.dim(1), hw = images.dim(2) * images.dim(3);
  Normalization s = identity_normalization(c);
  const auto x = images.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const float* p = x.data() + (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) sum += p[j];
    }
    const double count = static_cast<double>(n * hw);
    const double mean = sum / count;
    for (std::size_t i = 0; i < n; ++i) {
      const float* p = x.data() + (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) sq += (p[j] - mean) * (p[j] - mean);
    }
    const double sd = std::sqrt(sq / count);
    s.mean[ch] = mean;
    s.stddev[ch] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

namespace {

Tensor per_channel(const Tensor& images, const Normalization& stats, bool forward) {
  if (images.rank() != 4 || images.dim(1) != stats.mean.size() || stats.stddev.size() != stats.mean.size()) {
    throw DimensionError("normalization statistics do not match image channels");
  }
  Tensor out = images;
  const std::size_t c = images.dim(1), hw = images.dim(2) * images.dim(3);
  auto y = out.data();
  for (std::size_t i = 0; i < images.dim(0); ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      float* p = y.data() + (i * c + ch) * hw;
      const double m = stats.mean[ch], sd = stats.stddev[ch];
      for (std::size_t j = 0; j < hw; ++j) {
        p[j] = static_cast<float>(forward ? (p[j] - m) / sd : p[j] * sd + m);
      }
    }
  }
  return out;
}

}  // namespace

Tensor normalize(const Tensor& images, const Normalization& stats) { return per_channel(images, stats, true); }
Tensor denormalize(const Tensor& images, const Normalization& stats) { return per_channel(images, stats, false); }

Tensor synth_template(std::size_t k, std::size_t num_classes, const SynthGeometry& g) {
  if (k >= num_classes) throw ContractError("template class out of range");
  const double pi = std::numbers::pi;
  const double theta = pi * static_cast<double>(k) / static_cast<double>(num_classes);
  const double phase = 2.0 * pi * static_cast<double>(k) * 0.37;
  const double freq = 2.0;
  const double size = static_cast<double>(std::max(g.height, g.width));
  Tensor t({1, g.channels, g.height, g.width}, 0.0f);
  auto d = t.data();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t y = 0; y < g.height; ++y) {
      for (std::size_t x = 0; x < g.width; ++x) {
        const double u = static_cast<double>(x) * std::cos(theta) + static_cast<double>(y) * std::sin(theta);
        const double v = kSynthAmplitude * std::cos(2.0 * pi * freq * u / size + phase + static_cast<double>(c) * pi / 3.0);
        d[(c * g.height + y) * g.width + x] = static_cast<float>(v);
      }
    }
  }
  return t;
}

Dataset synth_classification(std::size_t n, std::size_t num_classes, double noise, std::uint64_t seed, Split split,
                             const SynthGeometry& g) {
  if (num_classes < 2) throw ContractError("synthetic data needs at least 2 classes");
  if (n < num_classes) throw ContractError("synthetic dataset size must be at least num_classes");
  if (!(noise >= 0.0)) throw ContractError("noise must be non-negative");
  RandomStream rng(seed, stream_id(split == Split::Train ? "synth.train" : "synth.val"));

  std::vector<Tensor> templates;
  for (std::size_t k = 0; k < num_classes; ++k) templates.push_back(synth_template(k, num_classes, g));

  Dataset d;
  d.num_classes = num_classes;
  d.split = split;
  d.normalization = identity_normalization(g.channels);
  d.labels.resize(n);
  const auto order = rng.permutation(n);
  for (std::size_t i = 0; i < n; ++i) d.labels[order[i]] = static_cast<int>(i % num_classes);

  const std::size_t per = g.channels * g.height * g.width;
  std::vector<float> pixels(n * per);
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = templates[static_cast<std::size_t>(d.labels[i])].data();
    for (std::size_t j = 0; j < per; ++j) {
      pixels[i * per + j] = static_cast<float>(t[j] + noise * rng.normal());
    }
  }
  d.images = Tensor({n, g.channels, g.height, g.width}, std::move(pixels));
  return d;
}

double bayes_accuracy(std::size_t num_classes, double noise, std::size_t trials, std::uint64_t seed,
                      const SynthGeometry& g) {
  if (trials == 0) throw ContractError("bayes_accuracy needs at least one trial");
  RandomStream rng(seed, stream_id("synth.bayes"));
  std::vector<Tensor> templates;
  for (std::size_t k = 0; k < num_classes; ++k) templates.push_back(synth_template(k, num_classes, g));
  const std::size_t per = g.channels * g.height * g.width;
  std::vector<double> x(per);
  std::size_t correct = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t label = rng.below(num_classes);
    const auto tl = templates[label].data();
    for (std::size_t j = 0; j < per; ++j) x[j] = tl[j] + noise * rng.normal();
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t k = 0; k < num_classes; ++k) {
      const auto tk = templates[k].data();
      double dist = 0.0;
      for (std::size_t j = 0; j < per; ++j) dist += (x[j] - tk[j]) * (x[j] - tk[j]);
      if (dist < best_d) {
        best_d = dist;
        best = k;
      }
    }
    if (best == label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(trials);
}

Tensor augment(const Tensor& images, std::size_t crop_padding, double flip_prob, RandomStream& rng) {
  if (images.rank() != 4) throw DimensionError("augment expects [N, C, H, W]");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw ContractError("flip probability must lie in [0, 1]");
  const std::size_t n = images.dim(0), c = images.dim(1), h = images.dim(2), w = images.dim(3);
  if (crop_padding == 0 && flip_prob == 0.0) return images;
  Tensor out(images.shape(), 0.0f);
  const auto src = images.data();
  auto dst = out.data();
  const auto p = static_cast<std::ptrdiff_t>(crop_padding);
  for (std::size_t i = 0; i < n; ++i) {
    std::ptrdiff_t dy = 0, dx = 0;
    if (crop_padding > 0) {
      dy = static_cast<std::ptrdiff_t>(rng.below(2 * crop_padding + 1)) - p;
      dx = static_cast<std::ptrdiff_t>(rng.below(2 * crop_padding + 1)) - p;
    }
    const bool flip = flip_prob > 0.0 && rng.bernoulli(flip_prob);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const float* s = src.data() + (i * c + ch) * h * w;
      float* d = dst.data() + (i * c + ch) * h * w;
      for (std::size_t y = 0; y < h; ++y) {
        const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
        if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t x = 0; x < w; ++x) {
          const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x) + dx;
          if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
          const std::size_t ox = flip ? w - 1 - x : x;
          d[y * w + ox] = s[static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)];
        }
      }
    }
  }
  return out;
}

Tensor flip_horizontal(const Tensor& images, std::span<const std::uint8_t> mask) {
  if (images.rank() != 4) throw DimensionError("flip expects [N, C, H, W]");
  if (mask.size() != images.dim(0)) throw DimensionError("flip mask length must equal batch size");
  Tensor out = images;
  const std::size_t c = images.dim(1), h = images.dim(2), w = images.dim(3);
  auto d = out.data();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    for (std::size_t row = 0; row < c * h; ++row) {
      float* r = d.data() + (i * c * h + row) * w;
      std::reverse(r, r + w);
    }
  }
  return out;
}

Batch gather(const Dataset& data, std::span<const std::size_t> indices) {
  const std::size_t per = data.images.size() / data.size();
  Shape shape = data.images.shape();
  shape[0] = indices.size();
  std::vector<float> pixels(indices.size() * per);
  Batch b;
  b.labels.resize(indices.size());
  const auto src = data.images.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t k = indices[i];
    if (k >= data.size()) throw ContractError("batch index out of range");
    std::copy_n(src.data() + k * per, per, pixels.data() + i * per);
    b.labels[i] = data.labels[k];
  }
  b.images = Tensor(shape, std::move(pixels));
  return b;
}

double top1_accuracy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw DimensionError("accuracy expects [N, C] logits and N labels");
  }
  if (labels.empty()) throw ContractError("accuracy of an empty set is undefined");
  const std::size_t c = logits.dim(1);
  const auto z = logits.data();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const float* row = z.data() + i * c;
    const auto best = static_cast<int>(std::max_element(row, row + c) - row);
    if (best == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double mean_iou(std::span<const int> predicted, std::span<const int> truth, std::size_t num_classes) {
  if (predicted.size() != truth.size()) throw DimensionError("mIOU inputs differ in length");
  if (truth.empty()) throw ContractError("mIOU of an empty set is undefined");
  std::vector<std::size_t> tp(num_classes), fp(num_classes), fn(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int p = predicted[i], t = truth[i];
    if (p < 0 || t < 0 || static_cast<std::size_t>(p) >= num_classes || static_cast<std::size_t>(t) >= num_classes) {
      throw ContractError("mIOU label outside [0, num_classes)");
    }
    if (p == t) {
      ++tp[static_cast<std::size_t>(t)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(t)];
    }
  }
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    const std::size_t denom = tp[k] + fp[k] + fn[k];
    if (denom == 0) continue;
    sum += static_cast<double>(tp[k]) / static_cast<double>(denom);
    ++present;
  }
  return sum / static_cast<double>(present);
}

}  // namespace pea
