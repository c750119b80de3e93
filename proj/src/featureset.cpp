#include "orpt/featureset.hpp"

#include "orpt/dataset.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace orpt {

namespace {
constexpr char kMagic[8] = {'O', 'R', 'P', 'T', 'F', 'E', 'A', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  const auto off = is.tellg();
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw FormatError("feature set: truncated header",
                      off < 0 ? 0 : static_cast<std::uint64_t>(off));
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
}  // namespace

void FeatureSet::append(const SequenceSample& s) {
  if (timesteps == 0 && features == 0) {
    timesteps = static_cast<std::uint32_t>(s.timesteps);
    features = static_cast<std::uint32_t>(s.features);
  }
  if (static_cast<std::uint32_t>(s.timesteps) != timesteps ||
      static_cast<std::uint32_t>(s.features) != features)
    throw std::domain_error("feature set: sample shape mismatch");
  data.reserve(data.size() + s.values.size());
  for (double v : s.values) data.push_back(static_cast<float>(v));
  labels.push_back(static_cast<std::uint8_t>(s.label));
}

void write_feature_set(const std::string& path, const FeatureSet& fs) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("feature set: cannot open " + path + " for writing");
  os.write(kMagic, sizeof kMagic);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(fs.count()));
  put_u32(os, fs.timesteps);
  put_u32(os, fs.features);
  put_u32(os, fs.classes);
  const std::size_t rec = fs.record_size();
  for (std::size_t i = 0; i < fs.count(); ++i) {
    // f32 payload is written verbatim; host is little-endian
    os.write(reinterpret_cast<const char*>(fs.record(i)),
             static_cast<std::streamsize>(rec * sizeof(float)));
    os.put(static_cast<char>(fs.labels[i]));
  }
  if (!os) throw std::runtime_error("feature set: write failed: " + path);
}

FeatureSet read_feature_set(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("feature set: cannot open " + path, 0);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw FormatError("feature set: bad magic in " + path, 0);
  const std::uint32_t version = get_u32(is);
  if (version != kVersion)
    throw FormatError("feature set: unsupported version in " + path, 8);
  const std::uint32_t count = get_u32(is);
  FeatureSet fs;
  fs.timesteps = get_u32(is);
  fs.features = get_u32(is);
  fs.classes = get_u32(is);
  const std::size_t rec = fs.record_size();
  fs.data.resize(static_cast<std::size_t>(count) * rec);
  fs.labels.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!is.read(reinterpret_cast<char*>(fs.data.data() + static_cast<std::size_t>(i) * rec),
                 static_cast<std::streamsize>(rec * sizeof(float))))
      throw FormatError("feature set: truncated record in " + path,
                        28 + static_cast<std::uint64_t>(i) * (rec * sizeof(float) + 1));
    const int lb = is.get();
    if (lb < 0)
      throw FormatError("feature set: truncated label in " + path,
                        28 + static_cast<std::uint64_t>(i) * (rec * sizeof(float) + 1) +
                            rec * sizeof(float));
    fs.labels[i] = static_cast<std::uint8_t>(lb);
  }
  return fs;
}

}  // namespace orpt
