#pragma once

#include <cmath>
#include <cstddef>
#include <new>
#include <numeric>
#include <string>
#include <vector>

#include "deepbsde/common.hpp"

namespace deepbsde {

/// Allocator with one fixed, generous alignment for every buffer. Keeping
/// all tensor storage identically aligned makes vectorized kernels traverse
/// every buffer the same way, so identical computations on different tensors
/// produce identical bits.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t alignment = 64;

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(alignment)));
    }
    void deallocate(T* p, std::size_t) noexcept {
        ::operator delete(p, std::align_val_t(alignment));
    }

    friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
    friend bool operator!=(const AlignedAllocator&, const AlignedAllocator&) { return false; }
};

/// Dense row-major tensor of doubles. This is the only array type used by
/// the library; rank is dynamic and almost always 1 or 2 in practice.
class DenseTensor {
  public:
    DenseTensor() = default;

    explicit DenseTensor(std::vector<std::size_t> shape, double fill = 0.0)
        : shape_(std::move(shape)) {
        require(!shape_.empty(), "DenseTensor: shape must be non-empty");
        std::size_t n = 1;
        for (std::size_t e : shape_) {
            require(e > 0, "DenseTensor: zero extent");
            n *= e;
        }
        data_.assign(n, fill);
    }

    static DenseTensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
        return DenseTensor({rows, cols}, fill);
    }

    static DenseTensor vector(std::size_t n, double fill = 0.0) {
        return DenseTensor({n}, fill);
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t rows() const { return shape_.at(0); }
    std::size_t cols() const { return shape_.at(1); }

    using Storage = std::vector<double, AlignedAllocator<double>>;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    Storage& storage() { return data_; }
    const Storage& storage() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    /// Row-major element access for rank-2 tensors.
    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    bool same_shape(const DenseTensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    /// Throws NumericalError naming `label` if any entry is NaN or infinite.
    void check_finite(const std::string& label) const {
        if (!all_finite()) throw NumericalError("non-finite values in tensor '" + label + "'");
    }

  private:
    std::vector<std::size_t> shape_;
    Storage data_;
};

}  // namespace deepbsde
