#pragma once

#include <string>

#include "av/dataset.hpp"
#include "av/model.hpp"

namespace av {

inline constexpr uint32_t kFormatVersion = 1;

// Binary container formats are little-endian and documented in
// docs/FORMATS.md. Parameter and sample payloads are float32.

void save_model(const std::string& path, const AVModel& m);
AVModel load_model(const std::string& path);

struct LoadedSplit {
  GenConfig cfg;
  std::string name;
  std::vector<AVSample> samples;
};

void save_split(const std::string& path, const GenConfig& cfg, const std::string& split_name,
                const std::vector<AVSample>& samples);
LoadedSplit load_split(const std::string& path);

// train.avds / val.avds / test.avds in a directory.
void save_dataset_dir(const std::string& dir, const DatasetSplits& data);
DatasetSplits load_dataset_dir(const std::string& dir);

}  // namespace av
