#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "regram/train.hpp"

namespace regram {

inline constexpr uint16_t kModelFileVersion = 1;

struct CityModel {
  std::string city;
  Normalizer normalizer;
  Model model;
};

struct ModelFile {
  TrainConfig config;
  std::vector<CityModel> cities;
};

// Binary container: "RGRM" magic, little-endian u16 version, u64 manifest
// length, JSON manifest (config, per-city normalizer and tensor directory),
// float64 payload in registration order, u32 CRC-32 of the payload bytes.
// Writing is fully deterministic for identical inputs.
void save_model(const std::string& path, const TrainConfig& config,
                const std::vector<TrainedCity>& cities);

// Restores every city model.  When `expect` is given, its architecture
// (d_m / kernels / heads / tau / ablation flags) replaces the stored one and a
// mismatch surfaces as a shape error naming the offending tensor.
ModelFile load_model(const std::string& path,
                     const std::optional<ModelConfig>& expect = std::nullopt);

}  // namespace regram
