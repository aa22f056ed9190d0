#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pea/experiment.hpp"

namespace pea {

using Json = nlohmann::ordered_json;

Json to_json(const ModelSpec& spec);
Json to_json(const TrainConfig& cfg);
/// Flat object: mode, sota, granularity, init_end, trans_end, schedule_granularity.
Json to_json(const PeaSetup& p);
Json to_json(const DataSource& d);
Json to_json(const ExperimentConfig& cfg);
Json to_json(const MetricsRecord& r);

/// Strict readers: unknown keys and type mismatches raise ConfigError with the
/// JSON path of the field (e.g. "train.lr_schedule.factor").
ModelSpec model_spec_from_json(const Json& j, const std::string& path = "model");
TrainConfig train_config_from_json(const Json& j, const std::string& path = "train");
/// total_epochs is taken from `epochs`.
PeaSetup pea_setup_from_json(const Json& j, int epochs, const std::string& path = "pea");
DataSource data_source_from_json(const Json& j, const std::string& path = "data");
MetricsRecord metrics_record_from_json(const Json& j, const std::string& path = "record");

/// Reads an experiment document. A "preset" key selects a base configuration
/// (rescaled to "train.epochs" when given) which the remaining keys override.
/// Without a preset, model.architecture, train.epochs, train.batch_size,
/// train.base_lr and data are required.
ExperimentConfig experiment_from_json(const Json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

std::vector<std::string> preset_names();
/// Named recipe at desk scale. Epoch-denominated settings (warm-up, LR drops,
/// phase boundaries) are stated for 120 epochs and scaled to `epochs`.
ExperimentConfig preset(const std::string& name, int epochs = 24);

/// crc32 of the compact JSON dump, as 8 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace pea
