#include "pnmt/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pnmt {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size()))
    throw std::invalid_argument("tensor: " + shape_str(shape) + " does not hold " +
                                std::to_string(data.size()) + " values");
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor one_hot_rows(std::span<const int> ids, int64_t vocab_size) {
  Tensor t({static_cast<int64_t>(ids.size()), vocab_size});
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= vocab_size)
      throw std::out_of_range("token id " + std::to_string(ids[i]) + " outside vocabulary of " +
                              std::to_string(vocab_size));
    t.at(static_cast<int64_t>(i), ids[i]) = 1.0;
  }
  return t;
}

}  // namespace pnmt
