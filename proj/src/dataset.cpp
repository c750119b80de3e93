#include "orpt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>

namespace orpt {

namespace {

std::uint32_t read_be32(std::istream& is, std::uint64_t& offset) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw FormatError("idx: truncated header", offset);
  offset += 4;
  return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

void write_be32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

ImagePlane LabeledImageSet::plane(std::size_t i, int p) const {
  ImagePlane out;
  out.size = side;
  const std::size_t sz = static_cast<std::size_t>(side) * side;
  out.px.resize(sz);
  const float* src = pixels.data() + (i * planes + p) * sz;
  for (std::size_t k = 0; k < sz; ++k) out.px[k] = static_cast<double>(src[k]);
  return out;
}

LabeledImageSet load_mnist(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw FormatError("idx: cannot open " + images_path, 0);
  std::uint64_t off = 0;
  if (read_be32(imgs, off) != 0x00000803u)
    throw FormatError("idx: bad image magic in " + images_path, 0);
  const std::uint32_t count = read_be32(imgs, off);
  const std::uint32_t rows = read_be32(imgs, off);
  const std::uint32_t cols = read_be32(imgs, off);
  if (rows != cols) throw FormatError("idx: non-square images unsupported", off);

  LabeledImageSet set;
  set.side = static_cast<int>(rows);
  set.planes = 1;
  set.class_count = 10;
  const std::size_t sz = static_cast<std::size_t>(rows) * cols;
  std::vector<unsigned char> buf(sz);
  set.pixels.resize(static_cast<std::size_t>(count) * sz);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(sz)))
      throw FormatError("idx: truncated image data in " + images_path, off);
    off += sz;
    float* dst = set.pixels.data() + static_cast<std::size_t>(i) * sz;
    for (std::size_t k = 0; k < sz; ++k) dst[k] = static_cast<float>(buf[k]) / 255.0f;
  }

  std::ifstream lbls(labels_path, std::ios::binary);
  if (!lbls) throw FormatError("idx: cannot open " + labels_path, 0);
  std::uint64_t loff = 0;
  if (read_be32(lbls, loff) != 0x00000801u)
    throw FormatError("idx: bad label magic in " + labels_path, 0);
  const std::uint32_t lcount = read_be32(lbls, loff);
  if (lcount != count)
    throw FormatError("idx: image/label count mismatch (" + std::to_string(count) + " vs " +
                          std::to_string(lcount) + ")",
                      loff);
  set.labels.resize(count);
  if (!lbls.read(reinterpret_cast<char*>(set.labels.data()), count))
    throw FormatError("idx: truncated label data in " + labels_path, loff);
  return set;
}

LabeledImageSet load_cifar10(const std::vector<std::string>& batch_paths) {
  constexpr std::size_t kRecord = 3073;
  constexpr std::size_t kPlane = 1024;
  LabeledImageSet set;
  set.side = 32;
  set.planes = 3;
  set.class_count = 10;
  for (const auto& path : batch_paths) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cifar: cannot open " + path, 0);
    is.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::uint64_t>(is.tellg());
    if (bytes == 0 || bytes % kRecord != 0)
      throw FormatError("cifar: size of " + path + " is not a multiple of 3073", bytes);
    is.seekg(0);
    const std::size_t n = bytes / kRecord;
    std::vector<unsigned char> rec(kRecord);
    for (std::size_t i = 0; i < n; ++i) {
      if (!is.read(reinterpret_cast<char*>(rec.data()), kRecord))
        throw FormatError("cifar: truncated record in " + path, i * kRecord);
      set.labels.push_back(rec[0]);
      for (std::size_t k = 0; k < 3 * kPlane; ++k)
        set.pixels.push_back(static_cast<float>(rec[1 + k]) / 255.0f);
    }
  }
  return set;
}

void write_idx_images(const std::string& path, const LabeledImageSet& set) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("idx: cannot open " + path + " for writing", 0);
  write_be32(os, 0x00000803u);
  write_be32(os, static_cast<std::uint32_t>(set.count()));
  write_be32(os, static_cast<std::uint32_t>(set.side));
  write_be32(os, static_cast<std::uint32_t>(set.side));
  const std::size_t sz = static_cast<std::size_t>(set.side) * set.side;
  for (std::size_t i = 0; i < set.count(); ++i) {
    const float* src = set.pixels.data() + i * set.planes * sz;  // plane 0 only
    for (std::size_t k = 0; k < sz; ++k)
      os.put(static_cast<char>(std::lround(std::clamp(src[k], 0.0f, 1.0f) * 255.0f)));
  }
}

void write_idx_labels(const std::string& path, const LabeledImageSet& set) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("idx: cannot open " + path + " for writing", 0);
  write_be32(os, 0x00000801u);
  write_be32(os, static_cast<std::uint32_t>(set.count()));
  os.write(reinterpret_cast<const char*>(set.labels.data()),
           static_cast<std::streamsize>(set.count()));
}

LabeledImageSet make_synthetic_set(std::size_t count, int side, int planes, int classes,
                                   std::uint64_t seed) {
  LabeledImageSet set;
  set.side = side;
  set.planes = planes;
  set.class_count = classes;
  const std::size_t sz = static_cast<std::size_t>(side) * side;
  set.pixels.resize(count * planes * sz);
  set.labels.resize(count);

  // Class templates: a few Gaussian blobs at class-specific positions.
  struct Blob {
    double r, c, sigma, amp;
  };
  std::vector<std::vector<Blob>> tpl(static_cast<std::size_t>(classes));
  std::mt19937_64 trng(0x5eedULL);
  std::uniform_real_distribution<double> upos(0.2, 0.8);
  std::uniform_real_distribution<double> usig(0.06, 0.14);
  for (auto& blobs : tpl)
    for (int bcount = 0; bcount < 3; ++bcount)
      blobs.push_back({upos(trng) * side, upos(trng) * side, usig(trng) * side, 1.0});

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ulabel(0, classes - 1);
  std::uniform_real_distribution<double> ujit(-2.0, 2.0);
  std::normal_distribution<double> unoise(0.0, 0.05);
  for (std::size_t i = 0; i < count; ++i) {
    const int cls = ulabel(rng);
    set.labels[i] = static_cast<std::uint8_t>(cls);
    const double dr = ujit(rng), dc = ujit(rng);
    for (int p = 0; p < planes; ++p) {
      const double gain = planes == 1 ? 1.0 : 0.5 + 0.5 * ((cls + p) % 3) / 2.0;
      float* dst = set.pixels.data() + (i * planes + p) * sz;
      for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
          double v = 0.0;
          for (const auto& b : tpl[static_cast<std::size_t>(cls)]) {
            const double d2 = (r - b.r - dr) * (r - b.r - dr) + (c - b.c - dc) * (c - b.c - dc);
            v += b.amp * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
          }
          v = gain * v + unoise(rng);
          const int q = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
          dst[r * side + c] = static_cast<float>(q) / 255.0f;
        }
      }
    }
  }
  return set;
}

LabeledImageSet subset(const LabeledImageSet& set, std::size_t n) {
  LabeledImageSet out = set;
  n = std::min(n, set.count());
  out.labels.resize(n);
  out.pixels.resize(n * static_cast<std::size_t>(set.planes) * set.side * set.side);
  return out;
}

FeatureSet build_feature_set(const LabeledImageSet& set, int divisor) {
  if (set.side % divisor != 0)
    throw std::domain_error("build_feature_set: divisor must divide image side");
  const OrptMatrix rd = build_matrix(divisor);
  const AnalysisOperator op = analysis_operator(rd, set.side);

  const std::size_t n = set.count();
  std::vector<SequenceSample> samples(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    std::vector<SubbandGrid> grids;
    grids.reserve(static_cast<std::size_t>(set.planes));
    for (int p = 0; p < set.planes; ++p)
      grids.push_back(transform_2d(op, set.plane(idx, p)));
    samples[idx] = pack_sequence(grids, set.labels[idx]);
  }

  FeatureSet fs;
  fs.classes = static_cast<std::uint32_t>(set.class_count);
  for (const auto& s : samples) fs.append(s);
  return fs;
}

}  // namespace orpt
