#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>

#include <Eigen/Core>

namespace podeit {

/// FNV-1a, 64 bit. Used for artifact provenance, not for security.
class ContentHasher {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 1099511628211ULL;
    }
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  ContentHasher& add(T value) {
    bytes(&value, sizeof(T));
    return *this;
  }

  ContentHasher& add(std::string_view s) {
    add<std::uint64_t>(s.size());
    bytes(s.data(), s.size());
    return *this;
  }

  template <typename Derived>
  ContentHasher& add_matrix(const Eigen::DenseBase<Derived>& m) {
    add<std::int64_t>(m.rows());
    add<std::int64_t>(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) add<double>(m(i, j));
    return *this;
  }

  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 14695981039346656037ULL;
};

std::string hash_hex(std::uint64_t h);

}  // namespace podeit
