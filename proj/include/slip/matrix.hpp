#pragma once

#include <cstddef>
#include <vector>

namespace slip {

/// Dense row-major real matrix. Small models only; no view machinery.
class Mat {
public:
    Mat() = default;
    Mat(size_t rows, size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Mat(size_t rows, size_t cols, std::vector<double> data);

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }
    double& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    Mat transposed() const;

    static Mat identity(size_t n);

    friend Mat operator+(const Mat& a, const Mat& b);
    friend Mat operator-(const Mat& a, const Mat& b);
    friend Mat operator*(const Mat& a, const Mat& b);
    Mat& operator*=(double s);

    std::vector<double> matvec(const std::vector<double>& x) const;

    double frobenius_norm() const;
    double max_row_l1() const;

private:
    size_t rows_ = 0;
    size_t cols_ = 0;
    std::vector<double> data_;
};

double relative_frobenius_error(const Mat& approx, const Mat& reference);

/// u * v^T as a matrix.
Mat outer(const std::vector<double>& u, const std::vector<double>& v);

double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& a);

} // namespace slip
