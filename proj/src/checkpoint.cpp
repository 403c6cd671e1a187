#include "tlgen/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace tlgen {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[8] = {'T', 'L', 'G', 'C', 'K', 'P', 'T', '1'};

template <typename Scalar>
constexpr DType dtype_of() {
  return std::is_same_v<Scalar, float> ? DType::kFloat32 : DType::kFloat64;
}

std::size_t dtype_size(DType d) { return d == DType::kFloat32 ? 4 : 8; }

class Writer {
 public:
  template <typename T>
  void pod(const T& v) {
    const auto* p = reinterpret_cast<const std::byte*>(&v);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void text(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    const auto* p = reinterpret_cast<const std::byte*>(s.data());
    out_.insert(out_.end(), p, p + s.size());
  }
  void raw(std::span<const std::byte> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::byte> take() { return std::move(out_); }

 private:
  std::vector<std::byte> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> in) : in_(in) {}
  template <typename T>
  T pod() {
    T v;
    std::memcpy(&v, take(sizeof(T)).data(), sizeof(T));
    return v;
  }
  std::string text() {
    const auto n = pod<std::uint32_t>();
    auto b = take(n);
    return std::string(reinterpret_cast<const char*>(b.data()), n);
  }
  std::span<const std::byte> take(std::size_t n) {
    if (n > in_.size() - pos_) throw InvalidArgument("checkpoint: truncated data");
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
};

}  // namespace

template <typename Scalar>
TensorRecord TensorRecord::from(std::string name, const Tensor<Scalar>& tensor) {
  TensorRecord r;
  r.name = std::move(name);
  r.shape = tensor.shape();
  r.dtype = dtype_of<Scalar>();
  const auto* p = reinterpret_cast<const std::byte*>(tensor.ptr());
  r.payload.assign(p, p + tensor.size() * static_cast<Index>(sizeof(Scalar)));
  return r;
}

template <typename Scalar>
Tensor<Scalar> TensorRecord::to() const {
  if (dtype != dtype_of<Scalar>()) {
    throw InvalidArgument("checkpoint: tensor '" + name + "' has a different dtype");
  }
  Tensor<Scalar> t(shape);
  std::memcpy(t.ptr(), payload.data(), payload.size());
  return t;
}

const TensorRecord* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const TensorRecord& Checkpoint::at(const std::string& name) const {
  if (const auto* t = find(name)) return *t;
  throw InvalidArgument("checkpoint: missing tensor '" + name + "'");
}

const std::string& Checkpoint::meta(const std::string& key) const {
  auto it = metadata.find(key);
  if (it == metadata.end()) throw InvalidArgument("checkpoint: missing metadata '" + key + "'");
  return it->second;
}

template <typename Scalar>
void Checkpoint::put(const std::string& name, const Tensor<Scalar>& tensor) {
  TensorRecord r = TensorRecord::from(name, tensor);
  for (auto& t : tensors) {
    if (t.name == name) {
      t = std::move(r);
      return;
    }
  }
  tensors.push_back(std::move(r));
}

std::vector<std::byte> Checkpoint::to_bytes() const {
  Writer w;
  w.raw(std::as_bytes(std::span(kMagic)));
  w.pod(kVersion);
  w.pod(static_cast<std::uint32_t>(metadata.size()));
  for (const auto& [k, v] : metadata) {
    w.text(k);
    w.text(v);
  }
  w.pod(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.text(t.name);
    w.pod(static_cast<std::uint8_t>(t.dtype));
    w.pod(static_cast<std::uint32_t>(t.shape.size()));
    for (Index d : t.shape) w.pod(static_cast<std::int64_t>(d));
    w.raw(t.payload);
  }
  return w.take();
}

Checkpoint Checkpoint::from_bytes(std::span<const std::byte> bytes) {
  Reader r(bytes);
  if (std::memcmp(r.take(sizeof(kMagic)).data(), kMagic, sizeof(kMagic)) != 0) {
    throw InvalidArgument("checkpoint: bad magic");
  }
  const auto version = r.pod<std::uint32_t>();
  if (version != kVersion) {
    throw InvalidArgument("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint c;
  const auto n_meta = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.text();
    c.metadata[k] = r.text();
  }
  const auto n_tensors = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    TensorRecord t;
    t.name = r.text();
    const auto dtype = r.pod<std::uint8_t>();
    if (dtype > 1) throw InvalidArgument("checkpoint: unknown dtype in '" + t.name + "'");
    t.dtype = static_cast<DType>(dtype);
    const auto rank = r.pod<std::uint32_t>();
    for (std::uint32_t a = 0; a < rank; ++a) {
      const auto d = r.pod<std::int64_t>();
      if (d <= 0) throw InvalidArgument("checkpoint: bad extent in '" + t.name + "'");
      t.shape.push_back(static_cast<Index>(d));
    }
    auto payload = r.take(static_cast<std::size_t>(shape_size(t.shape)) * dtype_size(t.dtype));
    t.payload.assign(payload.begin(), payload.end());
    c.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw InvalidArgument("checkpoint: trailing bytes");
  return c;
}

void Checkpoint::save(const std::string& path) const {
  const auto bytes = to_bytes();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write checkpoint " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FileError("failed writing checkpoint " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open checkpoint " + path);
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_bytes(std::as_bytes(std::span(raw)));
}

template <typename Scalar>
void store_module(Checkpoint& ckpt, const std::string& prefix, Module<Scalar>& module) {
  ckpt.metadata[prefix + ".config"] = module.config().to_text();
  for (const auto& p : module.named_parameters()) ckpt.put(prefix + "/" + p.name, p.var.value());
  for (const auto& b : module.named_buffers()) ckpt.put(prefix + "/" + b.name, *b.tensor);
}

template <typename Scalar>
void restore_module(const Checkpoint& ckpt, const std::string& prefix, Module<Scalar>& module) {
  auto load_into = [&](const std::string& name, Tensor<Scalar>& dst) {
    Tensor<Scalar> t = ckpt.at(prefix + "/" + name).template to<Scalar>();
    if (t.shape() != dst.shape()) {
      throw InvalidArgument("checkpoint: '" + name + "' has shape " + shape_string(t.shape()) +
                            ", model expects " + shape_string(dst.shape()));
    }
    dst = std::move(t);
  };
  for (const auto& p : module.named_parameters()) {
    Var<Scalar> v = p.var;
    load_into(p.name, v.mutable_value());
  }
  for (const auto& b : module.named_buffers()) load_into(b.name, *b.tensor);
}

template <typename Scalar>
void store_adam(Checkpoint& ckpt, const std::string& prefix, const AdamState<Scalar>& state) {
  ckpt.metadata[prefix + ".step"] = std::to_string(state.step_count);
  ckpt.metadata[prefix + ".count"] = std::to_string(state.first_moment.size());
  for (std::size_t i = 0; i < state.first_moment.size(); ++i) {
    ckpt.put(prefix + "/m" + std::to_string(i), state.first_moment[i]);
    ckpt.put(prefix + "/v" + std::to_string(i), state.second_moment[i]);
  }
}

template <typename Scalar>
void restore_adam(const Checkpoint& ckpt, const std::string& prefix, AdamState<Scalar>& state) {
  const auto count = std::stoul(ckpt.meta(prefix + ".count"));
  if (count != state.first_moment.size()) {
    throw InvalidArgument("checkpoint: optimizer '" + prefix + "' tracks " + std::to_string(count) +
                          " tensors, expected " + std::to_string(state.first_moment.size()));
  }
  state.step_count = std::stoll(ckpt.meta(prefix + ".step"));
  for (std::size_t i = 0; i < count; ++i) {
    state.first_moment[i] = ckpt.at(prefix + "/m" + std::to_string(i)).template to<Scalar>();
    state.second_moment[i] = ckpt.at(prefix + "/v" + std::to_string(i)).template to<Scalar>();
  }
}

#define TLGEN_INSTANTIATE(S)                                                          \
  template TensorRecord TensorRecord::from<S>(std::string, const Tensor<S>&);         \
  template Tensor<S> TensorRecord::to<S>() const;                                     \
  template void Checkpoint::put<S>(const std::string&, const Tensor<S>&);             \
  template void store_module<S>(Checkpoint&, const std::string&, Module<S>&);         \
  template void restore_module<S>(const Checkpoint&, const std::string&, Module<S>&); \
  template void store_adam<S>(Checkpoint&, const std::string&, const AdamState<S>&);  \
  template void restore_adam<S>(const Checkpoint&, const std::string&, AdamState<S>&);

TLGEN_INSTANTIATE(float)
TLGEN_INSTANTIATE(double)

}  // namespace tlgen
