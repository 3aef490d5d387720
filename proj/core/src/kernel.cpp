#include "flim/kernel.hpp"

#include <algorithm>
#include <cmath>

#include "flim/error.hpp"

namespace flim {

KernelBank::KernelBank(int size, int channels) : size_(size), channels_(channels) {
  require(size >= 1 && size % 2 == 1, ErrorCode::invalid_argument,
          "kernel size must be a positive odd integer");
  require(channels >= 1, ErrorCode::invalid_argument, "kernel channels must be >= 1");
}

Kernel KernelBank::kernel_copy(std::size_t c) const {
  auto k = kernel(c);
  return Kernel{size_, channels_, {k.begin(), k.end()}};
}

void KernelBank::push_back(std::span<const double> coefficients, int represented) {
  require(coefficients.size() == kernel_length(), ErrorCode::shape_mismatch,
          "kernel coefficient count does not match the bank shape");
  require(represented >= 1, ErrorCode::invalid_argument, "kernel count must be positive");
  values_.insert(values_.end(), coefficients.begin(), coefficients.end());
  counts_.push_back(represented);
}

void KernelBank::erase(std::size_t c) {
  require(c < count(), ErrorCode::out_of_bounds, "kernel index out of range");
  const auto first = values_.begin() + static_cast<std::ptrdiff_t>(c * kernel_length());
  values_.erase(first, first + static_cast<std::ptrdiff_t>(kernel_length()));
  counts_.erase(counts_.begin() + static_cast<std::ptrdiff_t>(c));
}

void KernelBank::validate() const {
  require(size_ >= 1 && size_ % 2 == 1 && channels_ >= 1, ErrorCode::invariant_violation,
          "kernel bank has an invalid shape");
  require(values_.size() == counts_.size() * kernel_length(), ErrorCode::invariant_violation,
          "kernel bank values do not match its kernel count");
  require(std::all_of(counts_.begin(), counts_.end(), [](int c) { return c >= 1; }),
          ErrorCode::invariant_violation, "kernel counts must be positive");
  require(std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); }),
          ErrorCode::invariant_violation, "kernel coefficients must be finite");
}

}  // namespace flim
