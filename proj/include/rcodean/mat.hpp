#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rcodean {

/// Raised whenever two operands have incompatible shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix of doubles.
///
/// Vectors are stored as single columns. A batch of samples is a matrix whose
/// columns are the samples. There is no broadcasting anywhere: every binary
/// operation requires identical or conformable shapes and throws ShapeError
/// otherwise.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0);
  Mat(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Mat from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Mat column(std::vector<double> values);
  static Mat identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  /// "RxC", used in error messages.
  std::string shape_str() const;
  bool same_shape(const Mat& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  Mat transpose() const;
  Mat col(std::size_t c) const;
  /// Columns with the given indices, in order.
  Mat gather_cols(std::span<const std::size_t> indices) const;
  void set_col(std::size_t c, const Mat& column);

  double sum() const;
  /// Sum over columns, producing a rows x 1 vector.
  Mat row_sums() const;

  Mat& operator+=(const Mat& other);
  Mat& operator-=(const Mat& other);
  Mat& operator*=(double s);
  void fill(double v);

  friend bool operator==(const Mat&, const Mat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Mat operator+(Mat a, const Mat& b);
Mat operator-(Mat a, const Mat& b);
Mat operator*(Mat a, double s);

/// Standard matrix product a * b.
Mat matmul(const Mat& a, const Mat& b);
/// a^T * b without materializing the transpose.
Mat matmul_tn(const Mat& a, const Mat& b);
/// a * b^T without materializing the transpose.
Mat matmul_nt(const Mat& a, const Mat& b);

enum class ElemOp { add, sub, mul };
Mat elementwise(const Mat& a, const Mat& b, ElemOp kind);

struct Norms {
  double l1 = 0.0;
  double l2 = 0.0;
  double dot_self = 0.0;
};
Norms norms(const Mat& v);

double dot(const Mat& a, const Mat& b);

enum class Activation { identity, relu, sigmoid, tanh };
enum class ActMode { value, derivative };

/// Entrywise phi(z) or phi'(z). relu'(0) is 0.
Mat activation(const Mat& z, Activation kind, ActMode mode = ActMode::value);
double sigmoid(double z);

std::string to_string(Activation kind);
Activation activation_from_string(const std::string& name);

bool all_finite(const Mat& m);

}  // namespace rcodean
