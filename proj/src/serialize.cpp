#include "anonet/serialize.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "anonet/core/errors.hpp"

namespace anonet {

namespace {

constexpr char kWeightMagic[8] = {'A', 'N', 'O', 'N', 'E', 'T', 'W', '1'};
constexpr char kTensorMagic[8] = {'A', 'N', 'O', 'N', 'E', 'T', 'T', '1'};
constexpr std::uint32_t kTensorFormatVersion = 1;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  template <typename U>
  void scalar(U v) {
    std::uint8_t raw[sizeof(U)];
    std::memcpy(raw, &v, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(U));
    bytes(raw, sizeof(U));
  }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) { scalar(v); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  template <typename T>
  void floats(std::span<const T> v) {
    for (T x : v) scalar(static_cast<float>(x));
  }
  void finish() { u32(static_cast<std::uint32_t>(crc32(0L, buf_.data(), static_cast<uInt>(buf_.size())))); }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : buf_(b) {}
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw FormatError("file truncated");
  }
  template <typename U>
  U scalar() {
    need(sizeof(U));
    std::uint8_t raw[sizeof(U)];
    std::memcpy(raw, buf_.data() + pos_, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(U));
    pos_ += sizeof(U);
    U v;
    std::memcpy(&v, raw, sizeof(U));
    return v;
  }
  std::uint8_t u8() { return scalar<std::uint8_t>(); }
  std::uint32_t u32() { return scalar<std::uint32_t>(); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void floats(std::span<float> out) {
    for (auto& v : out) v = scalar<float>();
  }
  void magic(const char (&m)[8]) {
    need(8);
    if (std::memcmp(buf_.data(), m, 8) != 0) throw FormatError("bad magic number");
    pos_ = 8;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

void verify_checksum(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw FormatError("file too short");
  const std::size_t body = bytes.size() - 4;
  Reader tail(bytes.subspan(body));
  const std::uint32_t stored = tail.u32();
  const auto actual = static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(body)));
  if (stored != actual) throw FormatError("checksum mismatch");
}

template <typename E>
E checked_enum(std::uint8_t v, std::uint8_t max, const char* what) {
  if (v > max) throw FormatError(std::string("invalid ") + what + " code");
  return static_cast<E>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_weights(const Model& model) {
  Writer w;
  w.bytes(kWeightMagic, 8);
  w.u32(kWeightFormatVersion);
  w.str(model.config().name);
  w.u32(static_cast<std::uint32_t>(model.config().provenance));
  w.u32(static_cast<std::uint32_t>(model.config().input_norm));
  w.u32(static_cast<std::uint32_t>(model.layers().size()));
  for (const auto& l : model.layers()) {
    w.u32(static_cast<std::uint32_t>(l.spec.kernel));
    w.u32(static_cast<std::uint32_t>(l.conv.in_channels()));
    w.u32(static_cast<std::uint32_t>(l.spec.out_channels));
    w.u32(static_cast<std::uint32_t>(l.spec.stride));
    w.u8(static_cast<std::uint8_t>(l.spec.activation));
    w.u8(l.spec.batchnorm ? 1 : 0);
    w.u8(l.spec.trainable ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(l.spec.init));
    w.u8(static_cast<std::uint8_t>(l.spec.family));
    w.u8(l.bn && l.bn->running_initialized ? 1 : 0);
    w.scalar<std::uint16_t>(0);
    w.scalar<double>(l.bn ? l.bn->epsilon : 0.0);
    w.scalar<double>(l.bn ? l.bn->momentum : 0.0);
  }
  for (const auto& l : model.layers()) {
    w.floats(l.conv.weight.values());
    w.floats(std::span<const float>(l.conv.bias));
    if (l.bn) {
      w.floats(std::span<const float>(l.bn->gamma));
      w.floats(std::span<const float>(l.bn->beta));
      w.floats(std::span<const float>(l.bn->running_mean));
      w.floats(std::span<const float>(l.bn->running_var));
    }
  }
  w.finish();
  return w.take();
}

Model decode_weights(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.magic(kWeightMagic);
  verify_checksum(bytes);
  const std::uint32_t version = r.u32();
  if (version != kWeightFormatVersion) {
    throw FormatError("unsupported weight format version " + std::to_string(version));
  }
  ModelConfig cfg;
  cfg.name = r.str();
  const std::uint32_t prov = r.u32();
  if (prov > static_cast<std::uint32_t>(Provenance::custom)) throw FormatError("invalid provenance code");
  cfg.provenance = static_cast<Provenance>(prov);
  const std::uint32_t norm = r.u32();
  if (norm > static_cast<std::uint32_t>(InputNorm::center)) throw FormatError("invalid input normalization code");
  cfg.input_norm = static_cast<InputNorm>(norm);
  const std::uint32_t count = r.u32();
  if (count == 0 || count > 4096) throw FormatError("implausible layer count");
  struct Extra {
    std::size_t in;
    bool running;
    double eps, momentum;
  };
  std::vector<Extra> extra;
  for (std::uint32_t i = 0; i < count; ++i) {
    LayerSpec s;
    s.kernel = r.u32();
    const std::size_t in = r.u32();
    s.out_channels = r.u32();
    s.stride = r.u32();
    s.activation = checked_enum<Activation>(r.u8(), 2, "activation");
    s.batchnorm = r.u8() != 0;
    s.trainable = r.u8() != 0;
    s.init = checked_enum<InitKind>(r.u8(), 2, "init");
    s.family = checked_enum<FilterFamily>(r.u8(), 2, "filter family");
    const bool running = r.u8() != 0;
    r.scalar<std::uint16_t>();
    const double eps = r.scalar<double>();
    const double momentum = r.scalar<double>();
    cfg.layers.push_back(s);
    extra.push_back({in, running, eps, momentum});
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("weight file holds an invalid model: ") + e.what());
  }
  std::vector<ModelLayer<float>> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto& s = cfg.layers[i];
    const auto& x = extra[i];
    ModelLayer<float> l;
    l.conv = ConvParams<float>(s.out_channels, x.in, s.kernel, s.stride, s.trainable);
    r.need(l.conv.weight.size() * 4);
    r.floats(l.conv.weight.values());
    r.floats(l.conv.bias);
    if (s.batchnorm) {
      BatchNormParams<float> bn(s.out_channels);
      r.floats(bn.gamma);
      r.floats(bn.beta);
      r.floats(bn.running_mean);
      r.floats(bn.running_var);
      bn.epsilon = x.eps;
      bn.momentum = x.momentum;
      bn.running_initialized = x.running;
      l.bn = std::move(bn);
    }
    layers.push_back(std::move(l));
  }
  if (r.pos() + 4 != bytes.size()) throw FormatError("trailing bytes after payload");
  try {
    return Model::from_layers(std::move(cfg), std::move(layers));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("weight file is inconsistent: ") + e.what());
  }
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("short write to '" + path.string() + "'");
}

void save_weights(const Model& model, const std::filesystem::path& path) {
  write_file_bytes(path, encode_weights(model));
}

Model load_weights(const std::filesystem::path& path) { return decode_weights(read_file_bytes(path)); }

void load_weights_into(Model& model, const std::filesystem::path& path) {
  Model loaded = load_weights(path);
  const auto& a = model.layers();
  const auto& b = loaded.layers();
  if (a.size() != b.size()) {
    throw ShapeError("weights in '" + path.string() + "' have " + std::to_string(b.size()) +
                     " layers, model '" + model.config().name + "' has " + std::to_string(a.size()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].conv.weight.shape() != b[i].conv.weight.shape() || a[i].spec.stride != b[i].spec.stride ||
        a[i].bn.has_value() != b[i].bn.has_value()) {
      throw ShapeError("layer " + std::to_string(i) + " of '" + path.string() + "' is " +
                       b[i].conv.weight.shape().str() + ", model '" + model.config().name +
                       "' expects " + a[i].conv.weight.shape().str());
    }
  }
  model = std::move(loaded);
}

void write_tensor_file(const std::filesystem::path& path, const Tensor<float>& t,
                       const std::string& name) {
  Writer w;
  w.bytes(kTensorMagic, 8);
  w.u32(kTensorFormatVersion);
  w.str(name);
  const auto& s = t.shape();
  for (std::size_t d : {s.n, s.c, s.h, s.w}) w.u32(static_cast<std::uint32_t>(d));
  w.floats(t.values());
  w.finish();
  write_file_bytes(path, w.take());
}

Tensor<float> read_tensor_file(const std::filesystem::path& path, std::string* name) {
  const auto bytes = read_file_bytes(path);
  Reader r(bytes);
  r.magic(kTensorMagic);
  verify_checksum(bytes);
  if (r.u32() != kTensorFormatVersion) throw FormatError("unsupported tensor format version");
  std::string n = r.str();
  Shape4 s;
  s.n = r.u32();
  s.c = r.u32();
  s.h = r.u32();
  s.w = r.u32();
  if (s.size() * 4 + r.pos() + 4 != bytes.size()) throw FormatError("tensor payload size mismatch");
  Tensor<float> t(s);
  r.floats(t.values());
  if (name) *name = std::move(n);
  return t;
}

}  // namespace anonet
