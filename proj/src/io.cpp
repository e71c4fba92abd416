#include "av/io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

namespace av {

namespace {

void put_bytes(std::ostream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  put_bytes(os, b, 4);
}

void put_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  put_bytes(os, b, 8);
}

void put_f64(std::ostream& os, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

void put_f32(std::ostream& os, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<uint32_t>(s.size()));
  put_bytes(os, s.data(), s.size());
}

void get_bytes(std::istream& is, void* p, size_t n, const std::string& path) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  check(static_cast<size_t>(is.gcount()) == n, "io: truncated file " + path);
}

uint32_t get_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  get_bytes(is, b, 4, path);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t get_u64(std::istream& is, const std::string& path) {
  unsigned char b[8];
  get_bytes(is, b, 8, path);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is, const std::string& path) {
  uint64_t bits = get_u64(is, path);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

float get_f32(std::istream& is, const std::string& path) {
  uint32_t bits = get_u32(is, path);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

std::string get_str(std::istream& is, const std::string& path) {
  uint32_t n = get_u32(is, path);
  check(n < (1u << 20), "io: implausible string length in " + path);
  std::string s(n, '\0');
  if (n > 0) get_bytes(is, s.data(), n, path);
  return s;
}

void put_tensor_f32(std::ostream& os, const Tensor& t) {
  put_u32(os, static_cast<uint32_t>(t.ndim()));
  for (size_t d : t.shape()) put_u64(os, d);
  for (size_t i = 0; i < t.size(); ++i) put_f32(os, static_cast<float>(t[i]));
}

Tensor get_tensor_f32(std::istream& is, const std::string& path) {
  uint32_t nd = get_u32(is, path);
  check(nd <= 8, "io: implausible tensor rank in " + path);
  std::vector<size_t> shape(nd);
  for (uint32_t i = 0; i < nd; ++i) shape[i] = static_cast<size_t>(get_u64(is, path));
  size_t n = shape_numel(shape);
  check(n < (1u << 28), "io: implausible tensor size in " + path);
  std::vector<float> vals(n);
  for (size_t i = 0; i < n; ++i) vals[i] = get_f32(is, path);
  return Tensor::from_f32(std::move(shape), vals);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  check(os.good(), "io: cannot write " + path);
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  check(is.good(), "io: cannot read " + path);
  return is;
}

void expect_magic(std::istream& is, const char* magic, const std::string& path) {
  char got[4];
  get_bytes(is, got, 4, path);
  check(std::memcmp(got, magic, 4) == 0, "io: " + path + " is not a " + magic + " container");
}

uint32_t backbone_code(Backbone b) { return static_cast<uint32_t>(b); }

Backbone backbone_from_code(uint32_t c, const std::string& path) {
  check(c <= 2, "io: bad backbone code in " + path);
  return static_cast<Backbone>(c);
}

}  // namespace

void save_model(const std::string& path, const AVModel& m) {
  std::ofstream os = open_out(path);
  put_bytes(os, "AVCK", 4);
  put_u32(os, kFormatVersion);
  put_u32(os, backbone_code(m.spec.visual));
  put_u32(os, backbone_code(m.spec.audio));
  put_u32(os, m.spec.fusion == Fusion::Sum ? 0u : 1u);
  put_u32(os, static_cast<uint32_t>(m.spec.n_classes));
  put_u32(os, static_cast<uint32_t>(m.spec.feat_dim));
  put_u32(os, static_cast<uint32_t>(m.spec.channels));
  put_u32(os, static_cast<uint32_t>(m.spec.height));
  put_u32(os, static_cast<uint32_t>(m.spec.width));
  put_u32(os, static_cast<uint32_t>(m.spec.bins));
  put_u64(os, m.seed);
  put_u32(os, static_cast<uint32_t>(m.params.size()));
  for (const auto& [name, t] : m.params) {
    put_str(os, name);
    put_tensor_f32(os, t);
  }
  check(os.good(), "io: failed writing " + path);
}

AVModel load_model(const std::string& path) {
  std::ifstream is = open_in(path);
  expect_magic(is, "AVCK", path);
  uint32_t version = get_u32(is, path);
  check(version == kFormatVersion, "io: unsupported checkpoint version " +
                                       std::to_string(version) + " in " + path);
  AVModel m;
  m.spec.visual = backbone_from_code(get_u32(is, path), path);
  m.spec.audio = backbone_from_code(get_u32(is, path), path);
  m.spec.fusion = get_u32(is, path) == 0 ? Fusion::Sum : Fusion::Concat;
  m.spec.n_classes = get_u32(is, path);
  m.spec.feat_dim = get_u32(is, path);
  m.spec.channels = get_u32(is, path);
  m.spec.height = get_u32(is, path);
  m.spec.width = get_u32(is, path);
  m.spec.bins = get_u32(is, path);
  m.seed = get_u64(is, path);
  uint32_t n_params = get_u32(is, path);
  for (uint32_t i = 0; i < n_params; ++i) {
    std::string name = get_str(is, path);
    m.params.emplace(name, get_tensor_f32(is, path));
  }
  return m;
}

void save_split(const std::string& path, const GenConfig& cfg, const std::string& split_name,
                const std::vector<AVSample>& samples) {
  std::ofstream os = open_out(path);
  put_bytes(os, "AVDS", 4);
  put_u32(os, kFormatVersion);
  put_u32(os, static_cast<uint32_t>(cfg.n_classes));
  put_u32(os, static_cast<uint32_t>(cfg.samples_per_class));
  put_u32(os, static_cast<uint32_t>(cfg.frames));
  put_u32(os, static_cast<uint32_t>(cfg.channels));
  put_u32(os, static_cast<uint32_t>(cfg.height));
  put_u32(os, static_cast<uint32_t>(cfg.width));
  put_u32(os, static_cast<uint32_t>(cfg.bins));
  put_u64(os, cfg.seed);
  put_f64(os, cfg.redundancy);
  put_f64(os, cfg.correlation);
  put_f64(os, cfg.noise);
  put_str(os, split_name);
  put_u32(os, static_cast<uint32_t>(samples.size()));
  for (const AVSample& s : samples) {
    put_u32(os, static_cast<uint32_t>(s.label));
    put_tensor_f32(os, s.x_v);
    put_tensor_f32(os, s.x_a);
  }
  check(os.good(), "io: failed writing " + path);
}

LoadedSplit load_split(const std::string& path) {
  std::ifstream is = open_in(path);
  expect_magic(is, "AVDS", path);
  uint32_t version = get_u32(is, path);
  check(version == kFormatVersion,
        "io: unsupported dataset version " + std::to_string(version) + " in " + path);
  LoadedSplit out;
  out.cfg.n_classes = get_u32(is, path);
  out.cfg.samples_per_class = get_u32(is, path);
  out.cfg.frames = get_u32(is, path);
  out.cfg.channels = get_u32(is, path);
  out.cfg.height = get_u32(is, path);
  out.cfg.width = get_u32(is, path);
  out.cfg.bins = get_u32(is, path);
  out.cfg.seed = get_u64(is, path);
  out.cfg.redundancy = get_f64(is, path);
  out.cfg.correlation = get_f64(is, path);
  out.cfg.noise = get_f64(is, path);
  out.name = get_str(is, path);
  uint32_t n = get_u32(is, path);
  out.samples.resize(n);
  for (uint32_t i = 0; i < n; ++i) {
    out.samples[i].label = static_cast<int>(get_u32(is, path));
    out.samples[i].x_v = get_tensor_f32(is, path);
    out.samples[i].x_a = get_tensor_f32(is, path);
  }
  return out;
}

void save_dataset_dir(const std::string& dir, const DatasetSplits& data) {
  std::filesystem::create_directories(dir);
  save_split(dir + "/train.avds", data.cfg, "train", data.train);
  save_split(dir + "/val.avds", data.cfg, "val", data.val);
  save_split(dir + "/test.avds", data.cfg, "test", data.test);
}

DatasetSplits load_dataset_dir(const std::string& dir) {
  for (const char* name : {"/train.avds", "/val.avds", "/test.avds"})
    check(std::filesystem::exists(dir + name), "io: missing dataset file " + dir + name);
  DatasetSplits data;
  LoadedSplit train = load_split(dir + "/train.avds");
  data.cfg = train.cfg;
  data.train = std::move(train.samples);
  data.val = load_split(dir + "/val.avds").samples;
  data.test = load_split(dir + "/test.avds").samples;
  return data;
}

}  // namespace av
