#include "ainekf/adaptive_noise.hpp"

#include <stdexcept>
#include <string>

namespace ainekf {

InnovationWindow::InnovationWindow(int size) : size_(size) {
  if (size < 1 || size > kMaxWindow) {
    throw std::invalid_argument("innovation window must be in [1, " +
                                std::to_string(kMaxWindow) + "], got " +
                                std::to_string(size));
  }
  reset();
}

const Mat3& InnovationWindow::push(const Vec3& e) {
  buffer_[static_cast<std::size_t>(head_)] = e * e.transpose();
  head_ = (head_ + 1) % size_;
  filled_ = std::min(filled_ + 1, size_);
  mean_.setZero();
  for (int k = 0; k < filled_; ++k) {
    mean_ += buffer_[static_cast<std::size_t>(k)];
  }
  mean_ /= static_cast<double>(size_);
  return mean_;
}

void InnovationWindow::reset() {
  head_ = 0;
  filled_ = 0;
  mean_.setZero();
}

}  // namespace ainekf
