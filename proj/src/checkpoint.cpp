#include "prnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "prnet/error.hpp"

namespace prnet {
namespace {

constexpr char kMagic[4] = {'P', 'R', 'N', 'C'};
constexpr std::uint8_t kDtypeF32 = 0;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename U>
  void le(U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  bool done() const { return pos_ == in_.size(); }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) {
      throw Error(ErrorKind::format, "load_checkpoint", std::string("truncated while reading ") + what);
    }
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename U>
  U le(const char* what) {
    const auto s = take(sizeof(U), what);
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(static_cast<U>(s[i]) << (8 * i));
    return value;
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

template <typename Scalar>
std::vector<std::uint8_t> serialize_checkpoint(const Model<Scalar>& model) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.le<std::uint32_t>(kCheckpointVersion);
  const std::string header = model.config().to_json();
  w.le<std::uint32_t>(static_cast<std::uint32_t>(header.size()));
  w.bytes(header.data(), header.size());
  for (const auto& p : model.parameters()) {
    w.le<std::uint16_t>(static_cast<std::uint16_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    w.le<std::uint8_t>(kDtypeF32);
    w.le<std::uint8_t>(static_cast<std::uint8_t>(p.dims.size()));
    for (std::int64_t d : p.dims) w.le<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (Scalar v : p.var.value().values()) w.le<std::uint32_t>(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return w.take();
}

template <typename Scalar>
Model<Scalar> deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.take(sizeof(kMagic), "magic");
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorKind::format, "load_checkpoint", "bad magic bytes");
  }
  const auto version = r.le<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::format, "load_checkpoint", "unsupported version " + std::to_string(version));
  }
  const auto header_len = r.le<std::uint32_t>("header length");
  const auto header = r.take(header_len, "header");
  const ModelConfig config =
      ModelConfig::from_json(std::string_view(reinterpret_cast<const char*>(header.data()), header.size()));

  const std::vector<ParameterSpec> expected_specs = parameter_specs(config);
  std::vector<Tensor<Scalar>> values;
  values.reserve(expected_specs.size());
  for (const auto& expected : expected_specs) {
    const auto name_len = r.le<std::uint16_t>("name length");
    const auto name_bytes = r.take(name_len, "name");
    const std::string name(reinterpret_cast<const char*>(name_bytes.data()), name_bytes.size());
    if (name != expected.name) {
      throw Error(ErrorKind::format, "load_checkpoint", "expected parameter '" + expected.name + "', found '" + name + "'");
    }
    const auto dtype = r.le<std::uint8_t>("dtype");
    if (dtype != kDtypeF32) {
      throw Error(ErrorKind::format, "load_checkpoint", name + ": unsupported dtype " + std::to_string(dtype));
    }
    const auto rank = r.le<std::uint8_t>("rank");
    std::vector<std::int64_t> dims(rank);
    for (auto& d : dims) d = r.le<std::uint32_t>("dims");
    if (dims != expected.dims) {
      throw Error(ErrorKind::shape, "load_checkpoint", name + ": stored shape does not match the architecture");
    }
    const Shape shape = dims.size() == 4 ? Shape{dims[0], dims[1], dims[2], dims[3]} : Shape{1, dims[0], 1, 1};
    Tensor<Scalar> t(shape);
    for (auto& v : t.values()) v = static_cast<Scalar>(std::bit_cast<float>(r.le<std::uint32_t>("payload")));
    values.push_back(std::move(t));
  }
  if (!r.done()) throw Error(ErrorKind::format, "load_checkpoint", "trailing bytes after last parameter");
  return model_from_parameters<Scalar>(config, std::move(values));
}

template <typename Scalar>
void save_checkpoint(const Model<Scalar>& model, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "save_checkpoint", "cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io, "save_checkpoint", "write failed for " + path.string());
}

template <typename Scalar>
Model<Scalar> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "load_checkpoint", "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint<Scalar>(bytes);
}

template std::vector<std::uint8_t> serialize_checkpoint(const Model<float>&);
template std::vector<std::uint8_t> serialize_checkpoint(const Model<double>&);
template Model<float> deserialize_checkpoint(std::span<const std::uint8_t>);
template Model<double> deserialize_checkpoint(std::span<const std::uint8_t>);
template void save_checkpoint(const Model<float>&, const std::filesystem::path&);
template void save_checkpoint(const Model<double>&, const std::filesystem::path&);
template Model<float> load_checkpoint(const std::filesystem::path&);
template Model<double> load_checkpoint(const std::filesystem::path&);

}  // namespace prnet
