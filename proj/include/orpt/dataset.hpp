#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "orpt/featureset.hpp"
#include "orpt/subband.hpp"

namespace orpt {

/// Parse error carrying the byte offset where the format broke down.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& msg, std::uint64_t offset)
      : std::runtime_error(msg + " (offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Images with labels; 1 plane for grayscale, 3 for color. Pixels are
/// stored normalized to [0,1] by the fixed constant 255.
struct LabeledImageSet {
  int side = 0;
  int planes = 1;
  int class_count = 10;
  std::vector<float> pixels;  // count * planes * side * side
  std::vector<std::uint8_t> labels;

  std::size_t count() const { return labels.size(); }
  /// Materializes plane p of image i as a double-precision plane.
  ImagePlane plane(std::size_t i, int p) const;
};

/// IDX pair (big-endian), magic 0x803 for images and 0x801 for labels.
LabeledImageSet load_mnist(const std::string& images_path, const std::string& labels_path);

/// CIFAR-10 binary batches: 3073-byte records, label byte then 3072
/// channel-major pixels.
LabeledImageSet load_cifar10(const std::vector<std::string>& batch_paths);

/// IDX writers, used for fixtures and procedural data.
void write_idx_images(const std::string& path, const LabeledImageSet& set);
void write_idx_labels(const std::string& path, const LabeledImageSet& set);

/// Deterministic procedurally generated stand-in dataset: `classes` blob
/// layouts with per-sample jitter and noise, quantized to 8-bit like the
/// real datasets. Useful when the dataset files are not on disk.
LabeledImageSet make_synthetic_set(std::size_t count, int side, int planes, int classes,
                                   std::uint64_t seed);

/// First n images of the set (fewer if the set is smaller).
LabeledImageSet subset(const LabeledImageSet& set, std::size_t n);

/// Transforms every image with the d-divisor operator and packs sequences,
/// preserving input order. Fans out across images with OpenMP.
FeatureSet build_feature_set(const LabeledImageSet& set, int divisor);

}  // namespace orpt
