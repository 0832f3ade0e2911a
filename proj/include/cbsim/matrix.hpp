#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace cbsim {

// Dense row-major matrix of doubles. Throughout the project rows index arms
// and columns index agents.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols),
          data_(check_dims(rows, cols), fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) return Matrix();
        Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
        for (int r = 0; r < m.rows_; ++r) {
            if (static_cast<int>(rows[r].size()) != m.cols_)
                throw std::invalid_argument("Matrix::from_rows: ragged rows");
            for (int c = 0; c < m.cols_; ++c) m(r, c) = rows[r][c];
        }
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(int r, int c) { return data_[idx(r, c)]; }
    double operator()(int r, int c) const { return data_[idx(r, c)]; }

    // Contiguous view of one row (arms are rows, so this is one arm across agents).
    std::span<const double> row(int r) const {
        return {data_.data() + idx(r, 0), static_cast<std::size_t>(cols_)};
    }
    std::span<double> row(int r) {
        return {data_.data() + idx(r, 0), static_cast<std::size_t>(cols_)};
    }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    const std::vector<double>& data() const { return data_; }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    static std::size_t check_dims(int rows, int cols) {
        if (rows < 0 || cols < 0) throw std::invalid_argument("Matrix: negative dimension");
        return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    }
    std::size_t idx(int r, int c) const {
        return static_cast<std::size_t>(r) * cols_ + c;
    }

    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

// Same-shape boolean mask (e.g. which (arm, agent) pairs a constraint or
// variable participates in).
class Mask {
public:
    Mask() = default;
    Mask(int rows, int cols, bool fill = false)
        : rows_(rows), cols_(cols),
          data_(static_cast<std::size_t>(rows) * cols, fill ? 1 : 0) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool operator()(int r, int c) const { return data_[idx(r, c)] != 0; }
    void set(int r, int c, bool v) { data_[idx(r, c)] = v ? 1 : 0; }

private:
    std::size_t idx(int r, int c) const {
        return static_cast<std::size_t>(r) * cols_ + c;
    }
    int rows_ = 0;
    int cols_ = 0;
    std::vector<unsigned char> data_;
};

}  // namespace cbsim
