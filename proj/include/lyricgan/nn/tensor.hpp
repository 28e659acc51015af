#pragma once

#include <cstddef>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace lyricgan::nn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

/// Dense row-major tensor of 64-bit floats.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  /// Rank-2 tensor from nested rows, e.g. Tensor::matrix({{1, 2}, {3, 4}}).
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  void fill(double v);
  void set_zero() { fill(0.0); }
  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  /// Row-major matrix view; rank-1 tensors view as a single row, rank-3 as (d0*d1) x d2.
  MatrixMap as_matrix();
  ConstMatrixMap as_matrix() const;

  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::size_t shape_size(const std::vector<std::size_t>& shape);

/// Throws std::invalid_argument naming `what` when the shapes differ.
void require_shape(const Tensor& t, const std::vector<std::size_t>& shape, const char* what);

/// Learnable tensor with gradient and optimizer accumulators of the same shape.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, std::vector<std::size_t> shape);

  std::string name;
  Tensor value;
  Tensor grad;
  Tensor first_moment;   // Adam m
  Tensor second_moment;  // Adam v, Adagrad squared-gradient sum

  void zero_grad() { grad.set_zero(); }
  void reset_slots();
  std::size_t size() const { return value.size(); }
  const std::vector<std::size_t>& shape() const { return value.shape(); }
};

/// Uniform init in [-scale, scale].
void init_uniform(Parameter& p, std::mt19937_64& rng, double scale = 0.1);

}  // namespace lyricgan::nn
