#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "rcodean/dataset.hpp"
#include "rcodean/pipeline.hpp"

namespace rcodean {

void to_json(nlohmann::json& j, const PipelineConfig& c);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
void from_json(const nlohmann::json& j, PipelineConfig& c);

struct SyntheticSpec {
  std::size_t n = 1000;
  std::size_t k = 4;
  std::uint64_t seed = 0;
};

/// Fully resolved settings of one CLI run.
struct RunConfig {
  std::filesystem::path attr_list;
  std::filesystem::path images_dir;
  std::filesystem::path identity_file;
  std::optional<SyntheticSpec> synthetic;
  SplitFractions splits;
  PipelineConfig pipeline;
  std::filesystem::path out = "rcodean_out";
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_run_config(const std::filesystem::path& path);
/// Writes the resolved configuration as pretty-printed JSON.
void write_run_config(const RunConfig& config, const std::filesystem::path& path);

/// Synthetic data or the attribute list named by the config, with splits
/// applied (identity-disjoint when an identity file is given).
AttributeDataset load_dataset(const RunConfig& config);

}  // namespace rcodean
