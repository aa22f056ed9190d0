#pragma once

// File layout shared by checkpoints and exported models, all integers
// little-endian:
//
//   magic            8 bytes  "PEACKPT\0" (checkpoint) or "PEAMODEL" (export)
//   format_version   u32
//   section_count    u32
//   per section:     u32 name_length, name bytes (UTF-8),
//                    u64 offset (from file start), u64 length, u32 crc32
//   section payloads, back to back in table order
//
// A tensor payload is u32 rank, rank × u64 dims, then float32 values in
// row-major order. Checkpoints carry a "meta" JSON section plus param/,
// buffer/ and momentum/ tensors; exports carry a "graph" JSON section plus
// tensor/ payloads.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pea/config.hpp"
#include "pea/model.hpp"
#include "pea/trainer.hpp"

namespace pea {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::string_view kCheckpointMagic{"PEACKPT\0", 8};
inline constexpr std::string_view kExportMagic{"PEAMODEL", 8};

struct Section {
  std::string name;
  std::vector<std::uint8_t> bytes;
};

struct SectionInfo {
  std::string name;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  std::uint32_t crc = 0;
};

std::vector<std::uint8_t> encode_container(std::string_view magic, const std::vector<Section>& sections);
/// LoadError on bad magic or layout, VersionError on a newer format,
/// ChecksumError on a payload whose crc32 does not match.
std::vector<Section> decode_container(std::span<const std::uint8_t> bytes, std::string_view magic);
std::vector<SectionInfo> container_table(std::span<const std::uint8_t> bytes, std::string_view magic,
                                         std::uint32_t* version = nullptr);

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes, const std::string& name);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_bytes_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

struct Checkpoint {
  Model model;
  TrainConfig train;
  TrainerState trainer;
};

void save_checkpoint(const std::filesystem::path& path, const Model& model, const TrainConfig& train,
                     const TrainerState& trainer);
/// ShapeError when a stored tensor is missing or disagrees with the spec.
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct CheckpointInfo {
  std::uint32_t version = 0;
  Json meta;
  std::vector<SectionInfo> sections;
};

CheckpointInfo inspect_checkpoint(const std::filesystem::path& path);

struct ExportNode {
  int id = 0;
  std::string kind;  // Dense, Conv, BN, Pool, ReLU, Softmax, Add
  std::string name;
  std::vector<int> inputs;  // -1 is the network input
  Json attrs;
};

/// Inference-only network using the same kernels as the in-memory eval path.
class ExportedModel {
 public:
  ExportedModel(Json graph, std::map<std::string, Tensor> tensors);

  Tensor logits(const Tensor& x) const;
  Tensor probabilities(const Tensor& x) const;

  const std::vector<ExportNode>& nodes() const { return nodes_; }
  std::set<std::string> node_kinds() const;
  const Json& graph() const { return graph_; }

 private:
  Tensor run(const Tensor& x, int until) const;
  const Tensor& tensor(const std::string& name) const;

  Json graph_;
  std::vector<ExportNode> nodes_;
  std::map<std::string, Tensor> tensors_;
  std::size_t channels_ = 0, height_ = 0, width_ = 0;
  int logits_node_ = 0;
  int output_node_ = 0;
};

/// Collapses ensemble layers (CollapseError when any alpha < 1) and writes
/// the inference graph. ContractError if a non-ReLU activation remains.
ExportedModel export_collapsed(const Model& model, const std::filesystem::path& path);
ExportedModel load_exported(const std::filesystem::path& path);

/// "run_id,epoch,alpha,lr,train_loss,train_acc,val_loss,val_acc,wall_time_s"
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRecord& r);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);

}  // namespace pea
