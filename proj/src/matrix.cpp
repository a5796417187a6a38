#include "slip/matrix.hpp"

#include <cmath>

#include "slip/errors.hpp"

namespace slip {

Mat::Mat(size_t rows, size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw ShapeError("Mat: data size != rows*cols");
}

Mat Mat::transposed() const {
    Mat t(cols_, rows_);
    for (size_t r = 0; r < rows_; ++r)
        for (size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

Mat Mat::identity(size_t n) {
    Mat m(n, n);
    for (size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Mat operator+(const Mat& a, const Mat& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw ShapeError("Mat+: shape mismatch");
    Mat out = a;
    for (size_t i = 0; i < out.data_.size(); ++i) out.data_[i] += b.data_[i];
    return out;
}

Mat operator-(const Mat& a, const Mat& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw ShapeError("Mat-: shape mismatch");
    Mat out = a;
    for (size_t i = 0; i < out.data_.size(); ++i) out.data_[i] -= b.data_[i];
    return out;
}

Mat operator*(const Mat& a, const Mat& b) {
    if (a.cols_ != b.rows_) throw ShapeError("Mat*: inner dims mismatch");
    Mat out(a.rows_, b.cols_);
    for (size_t r = 0; r < a.rows_; ++r)
        for (size_t k = 0; k < a.cols_; ++k) {
            double av = a(r, k);
            if (av == 0.0) continue;
            for (size_t c = 0; c < b.cols_; ++c) out(r, c) += av * b(k, c);
        }
    return out;
}

Mat& Mat::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

std::vector<double> Mat::matvec(const std::vector<double>& x) const {
    if (x.size() != cols_) throw ShapeError("matvec: dim mismatch");
    std::vector<double> out(rows_, 0.0);
    for (size_t r = 0; r < rows_; ++r) {
        double acc = 0.0;
        const double* row = data_.data() + r * cols_;
        for (size_t c = 0; c < cols_; ++c) acc += row[c] * x[c];
        out[r] = acc;
    }
    return out;
}

double Mat::frobenius_norm() const {
    double acc = 0.0;
    for (double v : data_) acc += v * v;
    return std::sqrt(acc);
}

double Mat::max_row_l1() const {
    double best = 0.0;
    for (size_t r = 0; r < rows_; ++r) {
        double s = 0.0;
        for (size_t c = 0; c < cols_; ++c) s += std::fabs((*this)(r, c));
        if (s > best) best = s;
    }
    return best;
}

double relative_frobenius_error(const Mat& approx, const Mat& reference) {
    double ref = reference.frobenius_norm();
    double err = (approx - reference).frobenius_norm();
    if (ref == 0.0) return err == 0.0 ? 0.0 : err;
    return err / ref;
}

Mat outer(const std::vector<double>& u, const std::vector<double>& v) {
    Mat m(u.size(), v.size());
    for (size_t r = 0; r < u.size(); ++r)
        for (size_t c = 0; c < v.size(); ++c) m(r, c) = u[r] * v[c];
    return m;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size() && i < b.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

} // namespace slip
