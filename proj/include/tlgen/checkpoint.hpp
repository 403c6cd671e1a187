#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "tlgen/adam.hpp"
#include "tlgen/models.hpp"

namespace tlgen {

enum class DType : std::uint8_t { kFloat32 = 0, kFloat64 = 1 };

/// One named tensor with its element type and raw little-endian payload.
struct TensorRecord {
  std::string name;
  Shape shape;
  DType dtype = DType::kFloat32;
  std::vector<std::byte> payload;

  template <typename Scalar>
  static TensorRecord from(std::string name, const Tensor<Scalar>& tensor);
  /// Throws InvalidArgument when the stored dtype differs from Scalar.
  template <typename Scalar>
  Tensor<Scalar> to() const;
};

/// Versioned binary container of metadata and named tensors.
///
///   "TLGCKPT1"                       8-byte magic
///   u32 version                      currently 1
///   u32 n_meta, then n_meta x        (u32 len, key bytes, u32 len, value bytes)
///   u32 n_tensors, then n_tensors x  (u32 len, name bytes, u8 dtype, u32 rank,
///                                     rank x i64 dims, payload)
///
/// Integers and payloads are little-endian; metadata is written in key order.
class Checkpoint {
 public:
  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, std::string> metadata;
  std::vector<TensorRecord> tensors;

  const TensorRecord* find(const std::string& name) const;
  const TensorRecord& at(const std::string& name) const;
  const std::string& meta(const std::string& key) const;
  /// Appends or replaces.
  template <typename Scalar>
  void put(const std::string& name, const Tensor<Scalar>& tensor);

  std::vector<std::byte> to_bytes() const;
  static Checkpoint from_bytes(std::span<const std::byte> bytes);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

/// Stores parameters and batch-norm buffers under `prefix` + "/" + name, and
/// the model config under metadata key `prefix` + ".config".
template <typename Scalar>
void store_module(Checkpoint& ckpt, const std::string& prefix, Module<Scalar>& module);
/// Loads values into an already-built module; shapes must match exactly.
template <typename Scalar>
void restore_module(const Checkpoint& ckpt, const std::string& prefix, Module<Scalar>& module);

template <typename Scalar>
void store_adam(Checkpoint& ckpt, const std::string& prefix, const AdamState<Scalar>& state);
template <typename Scalar>
void restore_adam(const Checkpoint& ckpt, const std::string& prefix, AdamState<Scalar>& state);

}  // namespace tlgen
