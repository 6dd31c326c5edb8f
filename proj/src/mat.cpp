#include "rcodean/mat.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

namespace rcodean {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstView = Eigen::Map<const RowMajor>;
using View = Eigen::Map<RowMajor>;

ConstView view(const Mat& m) { return ConstView(m.data(), m.rows(), m.cols()); }
View view(Mat& m) { return View(m.data(), m.rows(), m.cols()); }

[[noreturn]] void shape_mismatch(const char* op, const Mat& a, const Mat& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " +
                   b.shape_str());
}

void require_same(const char* op, const Mat& a, const Mat& b) {
  if (!a.same_shape(b)) shape_mismatch(op, a, b);
}

}  // namespace

Mat::Mat(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Mat: data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_str());
  }
}

Mat Mat::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("Mat::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Mat(r, c, std::move(data));
}

Mat Mat::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return Mat(n, 1, std::move(values));
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Mat::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Mat Mat::transpose() const {
  Mat t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Mat Mat::col(std::size_t c) const {
  if (c >= cols_) throw ShapeError("Mat::col: index out of range for " + shape_str());
  Mat out(rows_, 1);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Mat Mat::gather_cols(std::span<const std::size_t> indices) const {
  Mat out(rows_, indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const std::size_t src = indices[j];
    if (src >= cols_) throw ShapeError("Mat::gather_cols: index out of range for " + shape_str());
    for (std::size_t r = 0; r < rows_; ++r) out(r, j) = (*this)(r, src);
  }
  return out;
}

void Mat::set_col(std::size_t c, const Mat& column) {
  if (c >= cols_ || column.rows_ != rows_ || column.cols_ != 1) {
    throw ShapeError("Mat::set_col: cannot place " + column.shape_str() + " into " + shape_str());
  }
  for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = column[r];
}

double Mat::sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

Mat Mat::row_sums() const {
  Mat out(rows_, 1);
  for (std::size_t r = 0; r < rows_; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols_; ++c) s += (*this)(r, c);
    out[r] = s;
  }
  return out;
}

Mat& Mat::operator+=(const Mat& other) {
  require_same("add", *this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Mat& Mat::operator-=(const Mat& other) {
  require_same("sub", *this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Mat& Mat::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

void Mat::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Mat operator+(Mat a, const Mat& b) { return a += b; }
Mat operator-(Mat a, const Mat& b) { return a -= b; }
Mat operator*(Mat a, double s) { return a *= s; }

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
  Mat out(a.rows(), b.cols());
  if (a.cols() == 0) return out;
  view(out).noalias() = view(a) * view(b);
  return out;
}

Mat matmul_tn(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows()) shape_mismatch("matmul_tn", a, b);
  Mat out(a.cols(), b.cols());
  if (a.rows() == 0) return out;
  view(out).noalias() = view(a).transpose() * view(b);
  return out;
}

Mat matmul_nt(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols()) shape_mismatch("matmul_nt", a, b);
  Mat out(a.rows(), b.rows());
  if (a.cols() == 0) return out;
  view(out).noalias() = view(a) * view(b).transpose();
  return out;
}

Mat elementwise(const Mat& a, const Mat& b, ElemOp kind) {
  require_same("elementwise", a, b);
  Mat out = a;
  auto o = out.values();
  auto bv = b.values();
  switch (kind) {
    case ElemOp::add:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
      break;
    case ElemOp::sub:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
      break;
    case ElemOp::mul:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
      break;
  }
  return out;
}

Norms norms(const Mat& v) {
  Norms n;
  for (double x : v.values()) {
    n.l1 += std::abs(x);
    n.dot_self += x * x;
  }
  n.l2 = std::sqrt(n.dot_self);
  return n;
}

double dot(const Mat& a, const Mat& b) {
  require_same("dot", a, b);
  double s = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  return s;
}

// Clamped so large |z| never rounds to exactly 0 or 1.
double sigmoid(double z) {
  constexpr double kLow = std::numeric_limits<double>::denorm_min();
  constexpr double kHigh = 1.0 - 0x1.0p-53;
  if (z >= 0.0) return std::min(1.0 / (1.0 + std::exp(-z)), kHigh);
  const double e = std::exp(z);
  return std::max(e / (1.0 + e), kLow);
}

Mat activation(const Mat& z, Activation kind, ActMode mode) {
  Mat out(z.rows(), z.cols());
  auto in = z.values();
  auto o = out.values();
  const bool deriv = mode == ActMode::derivative;
  switch (kind) {
    case Activation::identity:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = deriv ? 1.0 : in[i];
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] = deriv ? (in[i] > 0.0 ? 1.0 : 0.0) : (in[i] > 0.0 ? in[i] : 0.0);
      }
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < o.size(); ++i) {
        const double s = sigmoid(in[i]);
        o[i] = deriv ? s * (1.0 - s) : s;
      }
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < o.size(); ++i) {
        const double t = std::tanh(in[i]);
        o[i] = deriv ? 1.0 - t * t : t;
      }
      break;
  }
  return out;
}

std::string to_string(Activation kind) {
  switch (kind) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "unknown";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

bool all_finite(const Mat& m) {
  return std::all_of(m.values().begin(), m.values().end(),
                     [](double v) { return std::isfinite(v); });
}

}  // namespace rcodean
