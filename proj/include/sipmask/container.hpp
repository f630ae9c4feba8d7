#pragma once

#include <string>
#include <vector>

#include "sipmask/tensor.hpp"

namespace sipmask {

// Binary tensor container: 8-byte magic "SIPTENS1", little-endian u64 header
// length, UTF-8 JSON header listing {name, dtype, shape, byte_offset}, then
// the raw little-endian row-major payload. Offsets are relative to the
// payload start, non-overlapping and in header order.
struct ContainerEntry {
  std::string name;
  std::string dtype;  // "f32" or "f64"
  std::vector<int> shape;
  std::vector<float> f32;
  std::vector<double> f64;

  static ContainerEntry from(const std::string& name, const Tensor& t) {
    return {name, "f32", t.shape(), t.vec(), {}};
  }
  static ContainerEntry from(const std::string& name, const TensorD& t) {
    return {name, "f64", t.shape(), {}, t.vec()};
  }
  Tensor to_f32() const {
    SIP_CHECK(dtype == "f32", "entry " << name << " is not f32");
    return Tensor(shape, f32);
  }
  TensorD to_f64() const {
    SIP_CHECK(dtype == "f64", "entry " << name << " is not f64");
    return TensorD(shape, f64);
  }
};

void container_write(const std::string& path,
                     const std::vector<ContainerEntry>& entries);

std::vector<ContainerEntry> container_read(const std::string& path);

const ContainerEntry& container_find(const std::vector<ContainerEntry>& entries,
                                     const std::string& name);

}  // namespace sipmask
