// SPDX-License-Identifier: Apache-2.0
#include <synctva/errors.hpp>
#include <synctva/matrix.hpp>

#include <charconv>
#include <cmath>

namespace synctva {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
  : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c)
    throw DimensionError("matrix " + std::to_string(r) + "x" + std::to_string(c) + " given " +
                         std::to_string(data.size()) + " values");
}

std::string format_number(double v) {
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

} // namespace synctva
