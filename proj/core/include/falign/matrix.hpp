#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace falign {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Indices are 0-based here; modules that
// follow the 1-based vertex convention convert at their own boundary.
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    for (double x : data_) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  Vec& data() { return data_; }
  const Vec& data() const { return data_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  Vec data_;
};

}  // namespace falign
