#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace driftlab {

namespace detail {
/// Allocator for tensor payloads. Two jobs: default-initialize on
/// unqualified construct (a buffer about to be fully overwritten skips the
/// zero-fill pass), and hand out 64-byte-aligned blocks. The fixed alignment
/// keeps vectorized reductions bitwise reproducible: SIMD loop peeling
/// depends on the address modulo the vector width, so a malloc that floats
/// between 16- and 32-byte alignment would change summation order run to run.
template <class T>
struct NoZeroAlloc : std::allocator<T> {
  static constexpr std::size_t kAlign = 64;
  template <class U>
  struct rebind {
    using other = NoZeroAlloc<U>;
  };
  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(kAlign)));
  }
  void deallocate(T* p, std::size_t n) {
    ::operator delete(p, n * sizeof(T), std::align_val_t(kAlign));
  }
  template <class U, class... Args>
  void construct(U* p, Args&&... args) {
    if constexpr (sizeof...(Args) == 0)
      ::new (static_cast<void*>(p)) U;
    else
      ::new (static_cast<void*>(p)) U(static_cast<Args&&>(args)...);
  }
};
}  // namespace detail

/// Thrown when two operands have incompatible shapes.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when a contract (finiteness, preconditions) is violated.
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense row-major array of 64-bit floats. The universal value type for
/// features, parameters and gradients. Immutable by convention once handed
/// to the tape; mutation helpers exist for construction and optimizers.
class Tensor {
 public:
  using Storage = std::vector<double, detail::NoZeroAlloc<double>>;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Tensor row(std::vector<double> data);
  static Tensor scalar(double v);
  static Tensor identity(std::size_t n);
  /// Entries are garbage; for buffers the caller overwrites in full.
  static Tensor uninitialized(std::vector<std::size_t> shape);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  Storage& vec() { return data_; }
  const Storage& vec() const { return data_; }

  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;
  /// Raises ContractError if any entry is NaN or Inf.
  void require_finite(const std::string& who) const;

  std::string shape_str() const;

 private:
  std::vector<std::size_t> shape_;
  Storage data_;
};

std::string shape_to_string(const std::vector<std::size_t>& s);

}  // namespace driftlab
