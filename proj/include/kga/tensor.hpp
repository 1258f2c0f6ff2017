#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace kga {

// Dense row-major tensor of 64-bit floats. Shapes are fixed at creation;
// exported operations must leave all values finite.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    Tensor() = default;
    Tensor(std::vector<std::size_t> shape_in, std::vector<double> values_in);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor vector(std::vector<double> values);

    std::size_t size() const { return values.size(); }
    std::size_t ndim() const { return shape.size(); }

    // 2-d accessors; throw on rank mismatch
    std::size_t rows() const;
    std::size_t cols() const;
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;

    std::span<double> row(std::size_t r);
    std::span<const double> row(std::size_t r) const;

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    void fill(double v);
};

// Numerically stable softmax (max subtraction). Output sums to 1 within
// 1e-12 and every element lies in (0, 1].
std::vector<double> softmax(std::span<const double> logits);

double dot(std::span<const double> a, std::span<const double> b);

// y = W x, W is rows x cols, x has cols entries
std::vector<double> matvec(const Tensor& w, std::span<const double> x);
// y = W^T x, x has rows entries
std::vector<double> matvec_transposed(const Tensor& w, std::span<const double> x);

// W += scale * a b^T, for gradient accumulation
void add_scaled_outer(Tensor& w, double scale, std::span<const double> a,
                      std::span<const double> b);
// y += scale * x
void axpy(double scale, std::span<const double> x, std::span<double> y);

// Throws Error naming `what` if any entry is NaN or infinite.
void check_finite(const Tensor& t, const std::string& what);
void check_finite(std::span<const double> v, const std::string& what);

}  // namespace kga
