#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace flim {

/// An a x a x f coefficient block laid out like a Patch.
struct Kernel {
  int size = 0;
  int channels = 0;
  std::vector<double> values;

  std::size_t coefficient_count() const noexcept { return values.size(); }
  bool operator==(const Kernel&) const = default;
};

/// m kernels sharing (a, f), stored contiguously, each with the number of
/// original kernels it stands for after simplification.
class KernelBank {
 public:
  KernelBank() = default;
  KernelBank(int size, int channels);

  int size() const noexcept { return size_; }
  int channels() const noexcept { return channels_; }
  std::size_t kernel_length() const noexcept {
    return static_cast<std::size_t>(size_) * static_cast<std::size_t>(size_) *
           static_cast<std::size_t>(channels_);
  }
  std::size_t count() const noexcept { return counts_.size(); }
  bool empty() const noexcept { return counts_.empty(); }

  std::span<const double> kernel(std::size_t c) const noexcept {
    return {values_.data() + c * kernel_length(), kernel_length()};
  }
  std::span<double> kernel(std::size_t c) noexcept {
    return {values_.data() + c * kernel_length(), kernel_length()};
  }
  Kernel kernel_copy(std::size_t c) const;

  std::span<const int> counts() const noexcept { return counts_; }
  int& count_of(std::size_t c) noexcept { return counts_[c]; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  void push_back(std::span<const double> coefficients, int represented = 1);
  void erase(std::size_t c);

  /// Throws invariant_violation if shapes, counts or values are inconsistent.
  void validate() const;

  bool operator==(const KernelBank&) const = default;

 private:
  int size_ = 0;
  int channels_ = 0;
  std::vector<double> values_;
  std::vector<int> counts_;
};

}  // namespace flim
