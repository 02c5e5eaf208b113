#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace deepcore {

// Flat, row-major tensor of 64-bit floats. Rank 1 holds points and logits,
// rank 2 holds weight matrices.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor from_vector(std::vector<double> values);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double operator[](std::size_t i) const { return data[i]; }
  double& operator[](std::size_t i) { return data[i]; }

  double at2(std::size_t r, std::size_t c) const;
  double& at2(std::size_t r, std::size_t c);

  std::span<const double> view() const { return data; }

  bool finite() const;
  void require_finite(const std::string& what) const;

  bool operator==(const Tensor&) const = default;
};

// Lowest index wins on ties.
int argmax(std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

}  // namespace deepcore
