#include "salengine/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "salengine/error.hpp"

namespace salengine {

std::int64_t num_elements(const Shape& dims) {
  std::int64_t n = 1;
  for (auto d : dims) {
    if (d < 0) throw DimensionError("negative extent in " + to_string(dims));
    n *= d;
  }
  return n;
}

std::string to_string(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << ',';
    os << dims[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape dims)
    : dims_(std::move(dims)),
      data_(static_cast<std::size_t>(num_elements(dims_)), 0.0f) {}

Tensor::Tensor(Shape dims, std::vector<float> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  if (num_elements(dims_) != static_cast<std::int64_t>(data_.size())) {
    throw DimensionError("tensor of dims " + to_string(dims_) + " given " +
                         std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::full(Shape dims, float value) {
  Tensor t(std::move(dims));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

std::int64_t Tensor::dim(std::size_t axis) const {
  if (axis >= dims_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         to_string(dims_));
  }
  return dims_[axis];
}

namespace {

void check_reshape(const Shape& from, const Shape& to) {
  if (num_elements(from) != num_elements(to)) {
    throw DimensionError("cannot reshape " + to_string(from) + " to " +
                         to_string(to));
  }
}

}  // namespace

Tensor Tensor::reshape(Shape new_dims) const& {
  check_reshape(dims_, new_dims);
  Tensor out;
  out.dims_ = std::move(new_dims);
  out.data_ = data_;
  return out;
}

Tensor Tensor::reshape(Shape new_dims) && {
  check_reshape(dims_, new_dims);
  dims_ = std::move(new_dims);
  return std::move(*this);
}

Tensor reshape(const Tensor& t, Shape new_dims) {
  return t.reshape(std::move(new_dims));
}

Tensor concat_channels(std::span<const Tensor* const> parts) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  const Shape& ref = parts.front()->dims();
  if (ref.empty()) throw DimensionError("concat of rank-0 tensor");
  std::int64_t channels = 0;
  for (const Tensor* p : parts) {
    const Shape& d = p->dims();
    if (d.size() != ref.size() || !std::equal(d.begin() + 1, d.end(), ref.begin() + 1)) {
      throw DimensionError("concat_channels: " + to_string(ref) + " vs " +
                           to_string(d));
    }
    channels += d[0];
  }
  Shape out_dims = ref;
  out_dims[0] = channels;
  Tensor out(out_dims);
  float* dst = out.raw();
  for (const Tensor* p : parts) {
    dst = std::copy(p->data().begin(), p->data().end(), dst);
  }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Tensor* parts[] = {&a, &b};
  return concat_channels(parts);
}

Tensor slice_channels(const Tensor& t, std::int64_t begin, std::int64_t count) {
  if (t.rank() == 0 || begin < 0 || count < 0 || begin + count > t.dim(0)) {
    throw DimensionError("slice_channels [" + std::to_string(begin) + ", +" +
                         std::to_string(count) + ") of " + to_string(t.dims()));
  }
  Shape out_dims = t.dims();
  out_dims[0] = count;
  const std::int64_t plane = t.dim(0) ? t.numel() / t.dim(0) : 0;
  Tensor out(out_dims);
  auto src = t.data().subspan(static_cast<std::size_t>(begin * plane),
                              static_cast<std::size_t>(count * plane));
  std::copy(src.begin(), src.end(), out.raw());
  return out;
}

Tensor pixelwise_mean(const Tensor& a, const Tensor& b) {
  if (a.dims() != b.dims()) {
    throw DimensionError("pixelwise_mean: " + to_string(a.dims()) + " vs " +
                         to_string(b.dims()));
  }
  Tensor out(a.dims());
  auto x = a.data();
  auto y = b.data();
  auto z = out.mutable_data();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = (x[i] + y[i]) / 2.0f;
  return out;
}

}  // namespace salengine
