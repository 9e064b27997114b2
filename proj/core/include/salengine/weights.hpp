#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "salengine/graph.hpp"
#include "salengine/tensor.hpp"

namespace salengine {

// Weight container ("VNWT"), little-endian:
//   char[4] "VNWT" | u32 version = 1 | u32 entry count
//   per entry: u32 name length | UTF-8 name | u8 dtype (0 = f32) |
//              u32 ndim | ndim x u64 dims | u32 CRC32 of payload | f32 payload
inline constexpr char kWeightsMagic[4] = {'V', 'N', 'W', 'T'};
inline constexpr std::uint32_t kWeightsVersion = 1;

enum class DType : std::uint8_t { kF32 = 0 };

struct ManifestEntry {
  std::string name;
  DType dtype = DType::kF32;
  Shape dims;
  std::uint32_t crc32 = 0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// CRC-32 (IEEE) of the little-endian f32 encoding of `values`.
std::uint32_t payload_crc32(std::span<const float> values);

/// Named tensors in insertion order; the order is preserved through the
/// container so re-serialization is byte-identical.
class WeightStore {
 public:
  /// Adds an entry. Throws UsageError if the name is already present.
  void insert(std::string name, Tensor t);
  /// Replaces an existing entry's tensor, keeping its position.
  void replace(std::string_view name, Tensor t);
  bool erase(std::string_view name);

  bool contains(std::string_view name) const { return index_.contains(name); }
  const Tensor* find(std::string_view name) const;
  const Tensor& at(std::string_view name) const;

  std::size_t size() const noexcept { return tensors_.size(); }
  const std::vector<ManifestEntry>& manifest() const noexcept { return manifest_; }
  const Tensor& tensor(std::size_t i) const { return tensors_.at(i); }
  std::int64_t total_params() const noexcept;

  friend bool operator==(const WeightStore&, const WeightStore&);

 private:
  std::vector<ManifestEntry> manifest_;
  std::vector<Tensor> tensors_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

std::string encode_container(const WeightStore& store);
/// Parses a full container. Bad magic, version, dtype or layout raise
/// FormatError; truncation or checksum failures raise CorruptionError. No
/// partial store is ever returned.
WeightStore decode_container(std::string_view bytes);

void write_container(const WeightStore& store, const std::filesystem::path& path);
WeightStore read_container(const std::filesystem::path& path);

std::string weight_entry_name(std::string_view layer);
std::string bias_entry_name(std::string_view layer);

/// (entry name, dims) for every learnable tensor of the graph, in layer order.
std::vector<std::pair<std::string, Shape>> expected_entries(const Graph& graph);

enum class InitScheme {
  kUniform,  // weights in [-0.05, 0.05)
  kFanIn,    // weights in [-b, b) with b = sqrt(6 / fan_in)
};

/// Seeded random weights from a 64-bit Mersenne twister, biases zero.
/// Portable: the floats are derived from raw generator bits. kFanIn keeps
/// activations from vanishing through the deep, normalization-free encoders,
/// where the fixed range decays every map to a constant.
WeightStore random_init(const Graph& graph, std::uint64_t seed,
                        InitScheme scheme = InitScheme::kUniform);

/// A graph paired with the weights of every learnable layer. Immutable;
/// one instance may serve concurrent forward passes.
class BoundModel {
 public:
  const Graph& graph() const noexcept { return *graph_; }
  const std::shared_ptr<const Graph>& graph_ptr() const noexcept { return graph_; }
  const WeightStore& store() const noexcept { return *store_; }

  const Tensor& weight(std::size_t layer) const { return *weights_.at(layer); }
  const Tensor* bias(std::size_t layer) const { return biases_.at(layer); }

 private:
  friend BoundModel bind(std::shared_ptr<const Graph>, WeightStore);
  std::shared_ptr<const Graph> graph_;
  std::shared_ptr<const WeightStore> store_;
  std::vector<const Tensor*> weights_;
  std::vector<const Tensor*> biases_;
};

/// Checks the store against the graph and binds it. Throws BindError listing
/// every missing, extra and mis-shaped entry; the reported kind is the first
/// non-empty of missing, extra, mismatched.
BoundModel bind(std::shared_ptr<const Graph> graph, WeightStore store);

}  // namespace salengine
