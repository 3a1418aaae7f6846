#include "posevid/tensor.hpp"

#include "posevid/error.hpp"
#include "posevid/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace posevid {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op)
{
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                             " vs " + shape_string(b.shape()));
    }
}

void require_matrix(const Tensor& a, const char* op)
{
    if (a.rank() != 2) {
        throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                             shape_string(a.shape()));
    }
}

template <typename F>
Tensor elementwise(const Tensor& a, const Tensor& b, const char* op, F f)
{
    require_same_shape(a, b, op);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = f(a[i], b[i]);
    }
    Tensor result(a.shape(), std::move(out));
    require_finite(result, op);
    return result;
}

}  // namespace

std::string shape_string(const Tensor::Shape& shape)
{
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? "," : "") << shape[i];
    }
    os << ')';
    return os.str();
}

std::size_t shape_product(const Tensor::Shape& shape)
{
    std::size_t n = 1;
    for (auto d : shape) {
        n *= d;
    }
    return n;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape))
{
    if (shape_.empty()) {
        throw DimensionError("tensor rank must be at least 1");
    }
    for (auto d : shape_) {
        if (d == 0) {
            throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape_));
        }
    }
    data_.assign(shape_product(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : Tensor(std::move(shape))
{
    if (data.size() != data_.size()) {
        throw DimensionError("buffer of " + std::to_string(data.size()) +
                             " elements does not match shape " + shape_string(shape_));
    }
    data_ = std::move(data);
}

Tensor Tensor::identity(std::size_t n)
{
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        t.at(i, i) = 1.0;
    }
    return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows)
{
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) {
            throw DimensionError("ragged rows in matrix literal");
        }
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
}

Tensor Tensor::random_normal(Shape shape, CounterRng& rng, double stddev)
{
    Tensor t(std::move(shape));
    for (auto& x : t.data_) {
        x = stddev * rng.normal();
    }
    return t;
}

std::size_t Tensor::dim(std::size_t axis) const
{
    if (axis >= shape_.size()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                             shape_string(shape_));
    }
    return shape_[axis];
}

Tensor Tensor::reshaped(Shape shape) const
{
    if (shape_product(shape) != data_.size()) {
        throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    return Tensor(std::move(shape), data_);
}

bool all_finite(const Tensor& t)
{
    return std::all_of(t.data().begin(), t.data().end(), [](double x) { return std::isfinite(x); });
}

void require_finite(const Tensor& t, const char* where)
{
    if (!all_finite(t)) {
        throw EvaluationError(std::string(where) + ": non-finite value");
    }
}

Tensor matmul(const Tensor& a, const Tensor& b)
{
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) {
        throw DimensionError("matmul: inner dimensions " + shape_string(a.shape()) + " x " +
                             shape_string(b.shape()));
    }
    Tensor c({m, n});
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = c.data().data();
    // i-p-j loop order: each c[i][j] still accumulates over p = 0..k-1 in order.
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = pc + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = pa[i * k + p];
            const double* brow = pb + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += aip * brow[j];
            }
        }
    }
    require_finite(c, "matmul");
    return c;
}

Tensor transpose(const Tensor& a)
{
    require_matrix(a, "transpose");
    Tensor t({a.cols(), a.rows()});
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            t.at(j, i) = a.at(i, j);
        }
    }
    return t;
}

Tensor add(const Tensor& a, const Tensor& b)
{
    return elementwise(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor subtract(const Tensor& a, const Tensor& b)
{
    return elementwise(a, b, "subtract", [](double x, double y) { return x - y; });
}

Tensor hadamard(const Tensor& a, const Tensor& b)
{
    return elementwise(a, b, "hadamard", [](double x, double y) { return x * y; });
}

Tensor axpy(const Tensor& a, double s, const Tensor& b)
{
    return elementwise(a, b, "axpy", [s](double x, double y) { return x + s * y; });
}

Tensor scale(const Tensor& a, double s)
{
    Tensor out = a;
    for (auto& x : out.data()) {
        x *= s;
    }
    require_finite(out, "scale");
    return out;
}

double sum(const Tensor& a)
{
    double s = 0.0;
    for (double x : a.data()) {
        s += x;
    }
    return s;
}

double dot(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

double frobenius_norm(const Tensor& a)
{
    return std::sqrt(dot(a, a));
}

Tensor softmax_rows(const Tensor& t)
{
    require_matrix(t, "softmax_rows");
    require_finite(t, "softmax_rows input");
    Tensor out(t.shape());
    const std::size_t c = t.cols();
    for (std::size_t r = 0; r < t.rows(); ++r) {
        double mx = t.at(r, 0);
        for (std::size_t j = 1; j < c; ++j) {
            mx = std::max(mx, t.at(r, j));
        }
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double e = std::exp(t.at(r, j) - mx);
            out.at(r, j) = e;
            z += e;
        }
        for (std::size_t j = 0; j < c; ++j) {
            out.at(r, j) /= z;
        }
    }
    return out;
}

Tensor gather_rows(const Tensor& m, std::span<const std::size_t> rows)
{
    require_matrix(m, "gather_rows");
    if (rows.empty()) {
        throw DimensionError("gather_rows: empty row selection");
    }
    Tensor out({rows.size(), m.cols()});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= m.rows()) {
            throw DomainError("gather_rows: row index " + std::to_string(rows[r]) + " out of range");
        }
        std::copy_n(m.data().begin() + static_cast<std::ptrdiff_t>(rows[r] * m.cols()), m.cols(),
                    out.data().begin() + static_cast<std::ptrdiff_t>(r * m.cols()));
    }
    return out;
}

void scatter_add_rows(Tensor& target, std::span<const std::size_t> rows, const Tensor& values)
{
    require_matrix(target, "scatter_add_rows");
    require_matrix(values, "scatter_add_rows");
    if (values.rows() != rows.size() || values.cols() != target.cols()) {
        throw DimensionError("scatter_add_rows: values " + shape_string(values.shape()) +
                             " do not match selection into " + shape_string(target.shape()));
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= target.rows()) {
            throw DomainError("scatter_add_rows: row index out of range");
        }
        for (std::size_t c = 0; c < target.cols(); ++c) {
            target.at(rows[r], c) += values.at(r, c);
        }
    }
}

AttentionResult scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v)
{
    require_matrix(q, "attention");
    require_matrix(k, "attention");
    require_matrix(v, "attention");
    if (q.cols() != k.cols()) {
        throw DimensionError("attention: query width " + std::to_string(q.cols()) +
                             " != key width " + std::to_string(k.cols()));
    }
    if (k.rows() != v.rows()) {
        throw DimensionError("attention: key count " + std::to_string(k.rows()) +
                             " != value count " + std::to_string(v.rows()));
    }
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Tensor scores = scale(matmul(q, transpose(k)), inv_sqrt_d);
    AttentionResult r;
    r.weights = softmax_rows(scores);
    r.out = matmul(r.weights, v);
    return r;
}

Tensor finite_diff_grad(const ScalarFunction& f, const Tensor& x, double eps)
{
    if (!(eps > 0.0)) {
        throw DomainError("finite_diff_grad: eps must be positive");
    }
    Tensor grad(x.shape());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + eps;
        const double fp = f(probe);
        probe[i] = orig - eps;
        const double fm = f(probe);
        probe[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw EvaluationError("finite_diff_grad: non-finite function value at coordinate " +
                                  std::to_string(i));
        }
        grad[i] = (fp - fm) / (2.0 * eps);
    }
    return grad;
}

}  // namespace posevid
