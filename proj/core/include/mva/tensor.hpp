#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace mva {

// Thrown on shape/rank mismatches between operands.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when an input is numerically unusable (NaN gradient, degenerate
// point configuration, zero normaliser).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dense row-major float64 tensor. The single numeric currency of the
// network modules; geometry and imaging reuse it for images and heatmaps.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> data);
    Tensor(std::vector<int> shape, double fill);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, double v) { return Tensor(std::move(shape), v); }
    static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // 3-D [C,H,W] accessors; the common case throughout the networks.
    double& at(int c, int y, int x) {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }
    double at(int c, int y, int x) const {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }
    double& at(int i, int j) {
        return data_[static_cast<std::size_t>(i) * shape_[1] + j];
    }
    double at(int i, int j) const {
        return data_[static_cast<std::size_t>(i) * shape_[1] + j];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    void fill(double v);

    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

std::size_t shape_numel(const std::vector<int>& shape);
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace mva
