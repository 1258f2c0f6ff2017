#include "kga/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "kga/errors.hpp"

namespace kga {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw InvalidArgument("tensor dimensions must be positive");
        n *= d;
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape_in, std::vector<double> values_in)
    : shape(std::move(shape_in)), values(std::move(values_in)) {
    if (shape.empty()) throw InvalidArgument("tensor needs at least one dimension");
    if (shape_product(shape) != values.size()) {
        throw InvalidArgument("tensor shape does not match value count");
    }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    std::size_t n = shape_product(shape);
    Tensor t;
    t.shape = std::move(shape);
    t.values.assign(n, 0.0);
    return t;
}

Tensor Tensor::vector(std::vector<double> values) {
    if (values.empty()) throw InvalidArgument("vector tensor must be non-empty");
    Tensor t;
    t.shape = {values.size()};
    t.values = std::move(values);
    return t;
}

std::size_t Tensor::rows() const {
    if (ndim() != 2) throw InvalidArgument("rows(): tensor is not 2-d");
    return shape[0];
}

std::size_t Tensor::cols() const {
    if (ndim() != 2) throw InvalidArgument("cols(): tensor is not 2-d");
    return shape[1];
}

double& Tensor::at(std::size_t r, std::size_t c) {
    return values[r * cols() + c];
}

double Tensor::at(std::size_t r, std::size_t c) const {
    return values[r * cols() + c];
}

std::span<double> Tensor::row(std::size_t r) {
    std::size_t c = cols();
    return {values.data() + r * c, c};
}

std::span<const double> Tensor::row(std::size_t r) const {
    std::size_t c = cols();
    return {values.data() + r * c, c};
}

void Tensor::fill(double v) { std::fill(values.begin(), values.end(), v); }

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw InvalidArgument("softmax: empty input");
    double max_logit = logits[0];
    for (double v : logits) {
        if (!std::isfinite(v)) throw InvalidArgument("softmax: non-finite input");
        max_logit = std::max(max_logit, v);
    }
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - max_logit);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

std::vector<double> matvec(const Tensor& w, std::span<const double> x) {
    if (x.size() != w.cols()) throw InvalidArgument("matvec: dimension mismatch");
    std::vector<double> out(w.rows());
    for (std::size_t r = 0; r < w.rows(); ++r) out[r] = dot(w.row(r), x);
    return out;
}

std::vector<double> matvec_transposed(const Tensor& w, std::span<const double> x) {
    if (x.size() != w.rows()) {
        throw InvalidArgument("matvec_transposed: dimension mismatch");
    }
    std::vector<double> out(w.cols(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
        axpy(x[r], w.row(r), out);
    }
    return out;
}

void add_scaled_outer(Tensor& w, double scale, std::span<const double> a,
                      std::span<const double> b) {
    if (a.size() != w.rows() || b.size() != w.cols()) {
        throw InvalidArgument("add_scaled_outer: dimension mismatch");
    }
    for (std::size_t r = 0; r < a.size(); ++r) {
        axpy(scale * a[r], b, w.row(r));
    }
}

void axpy(double scale, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += scale * x[i];
}

void check_finite(const Tensor& t, const std::string& what) {
    check_finite(std::span<const double>(t.values), what);
}

void check_finite(std::span<const double> v, const std::string& what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw Error("non-finite value in " + what);
    }
}

}  // namespace kga
