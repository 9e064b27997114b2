#include "salengine/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include <zlib.h>

#include "binary_io.hpp"
#include "salengine/error.hpp"

namespace salengine {

BindError::BindError(Kind kind, std::vector<std::string> missing,
                     std::vector<std::string> extra, std::vector<std::string> mismatched)
    : Error([&] {
        std::string msg = std::string(to_string(kind)) + ":";
        auto list = [&msg](const char* label, const std::vector<std::string>& names) {
          if (names.empty()) return;
          msg += std::string(" ") + label + " [";
          for (std::size_t i = 0; i < names.size(); ++i) {
            msg += (i ? ", " : "") + names[i];
          }
          msg += "]";
        };
        list("missing", missing);
        list("extra", extra);
        list("shape mismatch", mismatched);
        return msg;
      }()),
      kind_(kind),
      missing_(std::move(missing)),
      extra_(std::move(extra)),
      mismatched_(std::move(mismatched)) {}

const char* to_string(BindError::Kind kind) noexcept {
  switch (kind) {
    case BindError::Kind::kMissingWeight: return "MissingWeight";
    case BindError::Kind::kExtraWeight: return "ExtraWeight";
    case BindError::Kind::kShapeMismatch: return "ShapeMismatch";
  }
  return "BindError";
}

std::uint32_t payload_crc32(std::span<const float> values) {
  detail::ByteWriter w;
  w.f32s(values);
  const std::string& bytes = w.str();
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large payloads in chunks.
  const auto* p = reinterpret_cast<const Bytef*>(bytes.data());
  std::size_t left = bytes.size();
  while (left > 0) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = ::crc32(crc, p, n);
    p += n;
    left -= n;
  }
  return static_cast<std::uint32_t>(crc);
}

void WeightStore::insert(std::string name, Tensor t) {
  if (index_.contains(name)) throw UsageError("duplicate weight entry '" + name + "'");
  index_.emplace(name, tensors_.size());
  manifest_.push_back({std::move(name), DType::kF32, t.dims(), payload_crc32(t.data())});
  tensors_.push_back(std::move(t));
}

void WeightStore::replace(std::string_view name, Tensor t) {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("no weight entry '" + std::string(name) + "'");
  ManifestEntry& m = manifest_[it->second];
  m.dims = t.dims();
  m.crc32 = payload_crc32(t.data());
  tensors_[it->second] = std::move(t);
}

bool WeightStore::erase(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) return false;
  const std::size_t pos = it->second;
  manifest_.erase(manifest_.begin() + static_cast<std::ptrdiff_t>(pos));
  tensors_.erase(tensors_.begin() + static_cast<std::ptrdiff_t>(pos));
  index_.clear();
  for (std::size_t i = 0; i < manifest_.size(); ++i) index_.emplace(manifest_[i].name, i);
  return true;
}

const Tensor* WeightStore::find(std::string_view name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &tensors_[it->second];
}

const Tensor& WeightStore::at(std::string_view name) const {
  if (const Tensor* t = find(name)) return *t;
  throw UsageError("no weight entry '" + std::string(name) + "'");
}

std::int64_t WeightStore::total_params() const noexcept {
  std::int64_t n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

bool operator==(const WeightStore& a, const WeightStore& b) {
  return a.manifest_ == b.manifest_ && a.tensors_ == b.tensors_;
}

std::string encode_container(const WeightStore& store) {
  detail::ByteWriter w;
  w.bytes(std::string_view(kWeightsMagic, 4));
  w.u32(kWeightsVersion);
  w.u32(static_cast<std::uint32_t>(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    const ManifestEntry& m = store.manifest()[i];
    w.u32(static_cast<std::uint32_t>(m.name.size()));
    w.bytes(m.name);
    w.u8(static_cast<std::uint8_t>(m.dtype));
    w.u32(static_cast<std::uint32_t>(m.dims.size()));
    for (auto d : m.dims) w.u64(static_cast<std::uint64_t>(d));
    w.u32(m.crc32);
    w.f32s(store.tensor(i).data());
  }
  return std::move(w.str());
}

WeightStore decode_container(std::string_view bytes) {
  detail::ByteReader r(bytes, "VNWT");
  if (r.bytes(4) != std::string_view(kWeightsMagic, 4)) throw FormatError("VNWT: bad magic");
  if (auto v = r.u32(); v != kWeightsVersion) {
    throw FormatError("VNWT: unsupported version " + std::to_string(v));
  }
  const std::uint32_t count = r.u32();
  WeightStore store;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint32_t name_len = r.u32();
    std::string name(r.bytes(name_len));
    if (name.empty()) throw FormatError("VNWT: entry " + std::to_string(e) + " has an empty name");
    if (store.contains(name)) throw FormatError("VNWT: duplicate entry '" + name + "'");
    if (auto dtype = r.u8(); dtype != static_cast<std::uint8_t>(DType::kF32)) {
      throw FormatError("VNWT: entry '" + name + "' has unsupported dtype " +
                        std::to_string(dtype));
    }
    const std::uint32_t ndim = r.u32();
    Shape dims;
    std::uint64_t elems = 1;
    for (std::uint32_t k = 0; k < ndim; ++k) {
      const std::uint64_t d = r.u64();
      if (d == 0 || d > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()) ||
          elems > std::numeric_limits<std::uint64_t>::max() / 4 / d) {
        throw FormatError("VNWT: entry '" + name + "' has invalid extent " + std::to_string(d));
      }
      elems *= d;
      dims.push_back(static_cast<std::int64_t>(d));
    }
    const std::uint32_t crc = r.u32();
    if (elems * 4 > r.remaining()) {
      throw CorruptionError("VNWT: entry '" + name + "' payload truncated");
    }
    Tensor t(dims);
    r.f32s(t.mutable_data());
    if (payload_crc32(t.data()) != crc) {
      throw CorruptionError("VNWT: CRC mismatch in entry '" + name + "'");
    }
    store.insert(std::move(name), std::move(t));
  }
  if (r.remaining() != 0) {
    throw FormatError("VNWT: " + std::to_string(r.remaining()) + " trailing bytes");
  }
  return store;
}

void write_container(const WeightStore& store, const std::filesystem::path& path) {
  detail::write_file(path, encode_container(store));
}

WeightStore read_container(const std::filesystem::path& path) {
  try {
    return decode_container(detail::read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const CorruptionError& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  }
}

std::string weight_entry_name(std::string_view layer) { return std::string(layer) + ".weight"; }
std::string bias_entry_name(std::string_view layer) { return std::string(layer) + ".bias"; }

std::vector<std::pair<std::string, Shape>> expected_entries(const Graph& graph) {
  std::vector<std::pair<std::string, Shape>> out;
  for (const auto& layer : graph.layers()) {
    if (!layer.learnable()) continue;
    const auto& p = layer.conv();
    out.emplace_back(weight_entry_name(layer.name), p.weight_dims());
    if (p.has_bias) out.emplace_back(bias_entry_name(layer.name), Shape{p.out_ch});
  }
  return out;
}

WeightStore random_init(const Graph& graph, std::uint64_t seed, InitScheme scheme) {
  std::mt19937_64 rng(seed);
  WeightStore store;
  for (const auto& layer : graph.layers()) {
    if (!layer.learnable()) continue;
    const auto& p = layer.conv();
    Tensor w(p.weight_dims());
    const double fan_in = static_cast<double>(w.numel() / p.out_ch);
    const double bound = scheme == InitScheme::kFanIn ? std::sqrt(6.0 / fan_in) : 0.05;
    for (float& v : w.mutable_data()) {
      const double u = static_cast<double>(rng() >> 40) * 0x1.0p-24;  // [0, 1)
      v = static_cast<float>(bound * (2.0 * u - 1.0));
    }
    store.insert(weight_entry_name(layer.name), std::move(w));
    if (p.has_bias) store.insert(bias_entry_name(layer.name), Tensor(Shape{p.out_ch}));
  }
  return store;
}

BoundModel bind(std::shared_ptr<const Graph> graph, WeightStore store) {
  if (!graph) throw UsageError("bind: null graph");
  std::vector<std::string> missing, extra, mismatched;
  std::set<std::string, std::less<>> expected;
  for (const auto& [name, dims] : expected_entries(*graph)) {
    expected.insert(name);
    const Tensor* t = store.find(name);
    if (t == nullptr) {
      missing.push_back(name);
    } else if (t->dims() != dims) {
      mismatched.push_back(name + " " + to_string(t->dims()) + " != " + to_string(dims));
    }
  }
  for (const auto& m : store.manifest()) {
    if (!expected.contains(m.name)) extra.push_back(m.name);
  }
  if (!missing.empty() || !extra.empty() || !mismatched.empty()) {
    const auto kind = !missing.empty() ? BindError::Kind::kMissingWeight
                      : !extra.empty() ? BindError::Kind::kExtraWeight
                                       : BindError::Kind::kShapeMismatch;
    throw BindError(kind, std::move(missing), std::move(extra), std::move(mismatched));
  }

  BoundModel model;
  model.graph_ = std::move(graph);
  model.store_ = std::make_shared<const WeightStore>(std::move(store));
  const auto& layers = model.graph_->layers();
  model.weights_.assign(layers.size(), nullptr);
  model.biases_.assign(layers.size(), nullptr);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!layers[i].learnable()) continue;
    model.weights_[i] = &model.store_->at(weight_entry_name(layers[i].name));
    if (layers[i].conv().has_bias) {
      model.biases_[i] = &model.store_->at(bias_entry_name(layers[i].name));
    }
  }
  return model;
}

}  // namespace salengine
