#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>
#include <type_traits>

#include "tcgu/numerics/tensor.hpp"

namespace tcgu {

/// 64-bit FNV-1a, used for dataset and config fingerprints.
class Fnv1a {
 public:
  Fnv1a& bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= b[i];
      h_ *= 1099511628211ULL;
    }
    return *this;
  }
  template <typename T>
    requires std::is_arithmetic_v<T>
  Fnv1a& add(T v) {
    return bytes(&v, sizeof v);
  }
  template <typename T>
    requires std::is_arithmetic_v<T>
  Fnv1a& add(std::span<const T> v) {
    add<std::uint64_t>(v.size());
    return bytes(v.data(), v.size_bytes());
  }
  Fnv1a& add(std::string_view s) {
    add<std::uint64_t>(s.size());
    return bytes(s.data(), s.size());
  }
  Fnv1a& add(const Tensor& t) {
    add<std::uint64_t>(t.rows()).add<std::uint64_t>(t.cols());
    return add(t.data());
  }
  std::uint64_t value() const noexcept { return h_; }

 private:
  std::uint64_t h_ = 1469598103934665603ULL;
};

}  // namespace tcgu
