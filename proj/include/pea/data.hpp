#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pea/rng.hpp"
#include "pea/tensor.hpp"

namespace pea {

enum class Split { Train, Val };

/// Per-channel standardisation statistics.
struct Normalization {
  std::vector<double> mean;
  std::vector<double> stddev;
  bool operator==(const Normalization&) const = default;
};

struct Dataset {
  Tensor images;            // [N × C × H × W]
  std::vector<int> labels;  // length N
  std::size_t num_classes = 0;
  Split split = Split::Train;
  Normalization normalization;  // identity (0/1) when unnormalised

  std::size_t size() const { return labels.size(); }
  std::size_t channels() const { return images.dim(1); }
  std::size_t height() const { return images.dim(2); }
  std::size_t width() const { return images.dim(3); }
  /// DimensionError / ContractError on inconsistent shapes or labels.
  void validate() const;
};

struct Batch {
  Tensor images;
  std::vector<int> labels;
};

/// Raw IDX contents before scaling.
struct IdxImages {
  std::size_t count = 0, rows = 0, cols = 0;
  std::vector<std::uint8_t> pixels;
};

/// Throws ParseError (with byte offset) on bad magic, short header or truncated payload.
IdxImages parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_idx_images(const IdxImages& images);
std::vector<std::uint8_t> encode_idx_labels(const std::vector<std::uint8_t>& labels);

/// Loads an IDX pair, scales to [0,1] and standardises. With `stats` unset the
/// statistics come from this file (use for the training split); pass the
/// training statistics when loading a validation split.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 const Normalization* stats = nullptr, Split split = Split::Train);
/// Undoes standardisation and writes 8-bit IDX files. Single-channel only.
void save_idx(const Dataset& data, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path);

/// Population mean/std per channel; std of a constant channel is reported as 1.
Normalization compute_normalization(const Tensor& images);
Tensor normalize(const Tensor& images, const Normalization& stats);
Tensor denormalize(const Tensor& images, const Normalization& stats);

struct SynthGeometry {
  std::size_t channels = 1;
  std::size_t height = 16;
  std::size_t width = 16;
  bool operator==(const SynthGeometry&) const = default;
};

/// Peak amplitude of the class gratings; pixel noise has standard deviation `noise`.
inline constexpr double kSynthAmplitude = 0.12;

/// Noise-free class template k: an oriented grating with a fixed per-class phase.
Tensor synth_template(std::size_t k, std::size_t num_classes, const SynthGeometry& geometry = {});

/// Balanced labels, images = template(label) + N(0, noise²) per pixel.
/// Train and Val splits draw from distinct streams of the same seed.
Dataset synth_classification(std::size_t n, std::size_t num_classes, double noise, std::uint64_t seed,
                             Split split = Split::Train, const SynthGeometry& geometry = {});

/// Monte Carlo accuracy of the nearest-template rule, which is Bayes-optimal
/// for equal priors and isotropic Gaussian noise.
double bayes_accuracy(std::size_t num_classes, double noise, std::size_t trials, std::uint64_t seed,
                      const SynthGeometry& geometry = {});

/// Pad-and-random-crop then horizontal flip with probability flip_prob, per image.
Tensor augment(const Tensor& images, std::size_t crop_padding, double flip_prob, RandomStream& rng);
/// Flips image i when mask[i] != 0.
Tensor flip_horizontal(const Tensor& images, std::span<const std::uint8_t> mask);

Batch gather(const Dataset& data, std::span<const std::size_t> indices);

/// Fraction of rows whose argmax equals the label.
double top1_accuracy(const Tensor& logits, std::span<const int> labels);
/// Mean over classes occurring in prediction or truth of TP/(TP+FP+FN).
double mean_iou(std::span<const int> predicted, std::span<const int> truth, std::size_t num_classes);

}  // namespace pea
