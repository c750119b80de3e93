#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "orpt/subband.hpp"

namespace orpt {

/// In-memory feature-set: `count` sequences of T x F float32 values with a
/// byte label each. On disk: header {magic "ORPTFEAT", version u32,
/// count u32, T u32, F u32, classes u32}, all little-endian, followed by
/// count records of T*F little-endian f32 plus one u8 label.
struct FeatureSet {
  std::uint32_t timesteps = 0;
  std::uint32_t features = 0;
  std::uint32_t classes = 0;
  std::vector<float> data;  // count * T * F, record-major
  std::vector<std::uint8_t> labels;

  std::size_t count() const { return labels.size(); }
  std::size_t record_size() const {
    return static_cast<std::size_t>(timesteps) * features;
  }
  const float* record(std::size_t i) const { return data.data() + i * record_size(); }

  void append(const SequenceSample& s);
};

void write_feature_set(const std::string& path, const FeatureSet& fs);
FeatureSet read_feature_set(const std::string& path);

}  // namespace orpt
