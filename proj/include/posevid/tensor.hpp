#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace posevid {

class CounterRng;

// Dense row-major array of doubles. Every dimension is positive and the
// buffer length equals the product of the shape. A default-constructed
// tensor is an empty placeholder (rank 0, no elements).
class Tensor {
public:
    using Shape = std::vector<std::size_t>;

    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor identity(std::size_t n);
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor random_normal(Shape shape, CounterRng& rng, double stddev = 1.0);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t axis) const;
    bool empty() const { return data_.empty(); }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Matrix accessors; valid for rank-2 tensors only.
    std::size_t rows() const { return dim(0); }
    std::size_t cols() const { return dim(1); }
    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    Tensor reshaped(Shape shape) const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

std::string shape_string(const Tensor::Shape& shape);
std::size_t shape_product(const Tensor::Shape& shape);

bool all_finite(const Tensor& t);
// Throws EvaluationError naming `where` if any element is NaN or infinite.
void require_finite(const Tensor& t, const char* where);

// Product of an m×k and a k×n matrix. Each output element sums over k in
// increasing order, so results are reproducible bit for bit.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor hadamard(const Tensor& a, const Tensor& b);
// a + s * b
Tensor axpy(const Tensor& a, double s, const Tensor& b);

double sum(const Tensor& a);
double dot(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);
double frobenius_norm(const Tensor& a);

// Row-wise softmax with max subtraction.
Tensor softmax_rows(const Tensor& t);

// Matrix rows selected by index, in the order given.
Tensor gather_rows(const Tensor& m, std::span<const std::size_t> rows);
// target[rows[r], :] += values[r, :]
void scatter_add_rows(Tensor& target, std::span<const std::size_t> rows, const Tensor& values);

struct AttentionResult {
    Tensor out;      // n_q × d_v
    Tensor weights;  // n_q × n_k, rows sum to one
};

// softmax(Q Kᵀ / sqrt(d)) V. The weight matrix is always returned.
AttentionResult scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);

using ScalarFunction = std::function<double(const Tensor&)>;

// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps) per coordinate.
Tensor finite_diff_grad(const ScalarFunction& f, const Tensor& x, double eps);

}  // namespace posevid
