#include <doctest.h>

#include "posevid/error.hpp"
#include "posevid/io.hpp"
#include "posevid/rng.hpp"
#include "posevid/tensor.hpp"

#include <cmath>
#include <limits>

using namespace posevid;

TEST_CASE("matmul examples")
{
    const Tensor b = Tensor::from_rows({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
    CHECK(matmul(Tensor::identity(3), b) == b);

    const Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
    const Tensor e = Tensor::from_rows({{0}, {1}});
    CHECK(matmul(a, e) == Tensor::from_rows({{2}, {4}}));

    CHECK(matmul(b, Tensor({3, 2})) == Tensor({3, 2}));
    CHECK_THROWS_AS(matmul(a, b), DimensionError);
}

TEST_CASE("matmul associativity on random chains")
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CounterRng rng(seed);
        const Tensor a = Tensor::random_normal({4, 4}, rng);
        const Tensor b = Tensor::random_normal({4, 4}, rng);
        const Tensor c = Tensor::random_normal({4, 4}, rng);
        const Tensor d = Tensor::random_normal({4, 4}, rng);
        CHECK(max_abs_diff(matmul(matmul(matmul(a, b), c), d), matmul(a, matmul(b, matmul(c, d)))) < 1e-10);
    }
}

TEST_CASE("tensor construction rejects zero dimensions")
{
    CHECK_THROWS_AS(Tensor({2, 0}), DimensionError);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>(3)), DimensionError);
}

TEST_CASE("softmax rows")
{
    const Tensor s = softmax_rows(Tensor::from_rows({{0, 0, 0}}));
    for (int i = 0; i < 3; ++i) {
        CHECK(s[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }
    const Tensor big = softmax_rows(Tensor::from_rows({{1000, 0}}));
    CHECK(all_finite(big));
    CHECK(big[0] == doctest::Approx(1.0));
    CHECK(big[1] < 1e-300);

    const Tensor l2 = softmax_rows(Tensor::from_rows({{std::log(2.0), 0}}));
    CHECK(l2[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(l2[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

    CounterRng rng(3);
    const Tensor r = softmax_rows(Tensor::random_normal({6, 9}, rng, 30.0));
    for (std::size_t i = 0; i < 6; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < 9; ++j) {
            CHECK(r.at(i, j) >= 0.0);
            total += r.at(i, j);
        }
        CHECK(std::abs(total - 1.0) <= 1e-12);
    }
}

TEST_CASE("non-finite values are rejected")
{
    Tensor t({1, 2});
    t[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(softmax_rows(t), EvaluationError);
    CHECK_THROWS_AS(matmul(t, Tensor({2, 1}, 1.0)), EvaluationError);
}

TEST_CASE("scaled dot attention")
{
    SUBCASE("single key returns its value row")
    {
        const Tensor q = Tensor::from_rows({{1, -2}, {5, 0.5}});
        const Tensor k = Tensor::from_rows({{0.3, 0.4}});
        const Tensor v = Tensor::from_rows({{7, -1}});
        const auto r = scaled_dot_attention(q, k, v);
        CHECK(r.out == Tensor::from_rows({{7, -1}, {7, -1}}));
        CHECK(r.weights == Tensor::from_rows({{1}, {1}}));
    }
    SUBCASE("orthonormal queries equal to keys are diagonally dominant")
    {
        const Tensor q = Tensor::identity(2);
        const auto r = scaled_dot_attention(q, q, Tensor::identity(2));
        // softmax([1/sqrt2, 0])
        const double hi = std::exp(1.0 / std::sqrt(2.0)) / (std::exp(1.0 / std::sqrt(2.0)) + 1.0);
        CHECK(r.weights.at(0, 0) == doctest::Approx(hi));
        CHECK(r.weights.at(0, 0) > r.weights.at(0, 1));
        CHECK(r.weights.at(1, 1) > r.weights.at(1, 0));
        CHECK(r.out == r.weights);
    }
    SUBCASE("zero values give zero output")
    {
        CounterRng rng(1);
        const auto r = scaled_dot_attention(Tensor::random_normal({3, 4}, rng), Tensor::random_normal({5, 4}, rng),
                                            Tensor({5, 4}));
        CHECK(r.out == Tensor({3, 4}));
    }
    SUBCASE("output is a convex combination of value rows")
    {
        CounterRng rng(9);
        const Tensor v = Tensor::random_normal({6, 3}, rng);
        const auto r = scaled_dot_attention(Tensor::random_normal({4, 3}, rng), Tensor::random_normal({6, 3}, rng), v);
        for (std::size_t c = 0; c < 3; ++c) {
            double lo = 1e300, hi = -1e300;
            for (std::size_t k = 0; k < 6; ++k) {
                lo = std::min(lo, v.at(k, c));
                hi = std::max(hi, v.at(k, c));
            }
            for (std::size_t q = 0; q < 4; ++q) {
                CHECK(r.out.at(q, c) >= lo - 1e-12);
                CHECK(r.out.at(q, c) <= hi + 1e-12);
            }
        }
    }
    CHECK_THROWS_AS(scaled_dot_attention(Tensor({2, 3}), Tensor({2, 2}), Tensor({2, 2})), DimensionError);
}

TEST_CASE("finite difference gradient")
{
    const auto sq = [](const Tensor& x) { return dot(x, x); };
    const Tensor g = finite_diff_grad(sq, Tensor({1}, std::vector<double>{3.0}), 1e-4);
    CHECK(std::abs(g[0] - 6.0) < 1e-6);

    const Tensor zero = finite_diff_grad([](const Tensor&) { return 4.0; }, Tensor({3}, 1.5), 1e-3);
    CHECK(zero == Tensor({3}));

    const Tensor w = Tensor::from_rows({{0.5, -2.0, 3.25}});
    const Tensor lin = finite_diff_grad([&](const Tensor& x) { return dot(w, x); }, Tensor({1, 3}, 0.7), 1e-3);
    CHECK(max_abs_diff(lin, w) < 1e-9);

    CHECK_THROWS_AS(finite_diff_grad(sq, Tensor({1}), 0.0), DomainError);
    CHECK_THROWS_AS(finite_diff_grad([](const Tensor&) { return std::nan(""); }, Tensor({1}), 1e-3),
                    EvaluationError);
}

TEST_CASE("counter rng is a pure function of seed, stream and counter")
{
    CounterRng a(42, 3), b(42, 3), c(42, 4);
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        CHECK(x != c.next_u64());
    }
    CounterRng u(5);
    for (int i = 0; i < 1000; ++i) {
        const auto k = u.uniform_int(-3, 4);
        CHECK(k >= -3);
        CHECK(k <= 4);
        const double f = u.uniform();
        CHECK(f >= 0.0);
        CHECK(f < 1.0);
    }
}

TEST_CASE("PATN round trip and format errors")
{
    const Tensor t = Tensor::from_rows({{1.5, -2.25, 0}, {4, 5, 6}});
    const std::string bytes = encode_patn(t);
    CHECK(bytes.substr(0, 4) == "PATN");
    CHECK(bytes.size() == 4 + 4 + 2 * 4 + 6 * 4);
    CHECK(static_cast<unsigned char>(bytes[4]) == 2);
    CHECK(decode_patn(bytes) == t);

    CHECK_THROWS_AS(decode_patn("NOPE"), FormatError);
    CHECK_THROWS_AS(decode_patn(bytes.substr(0, bytes.size() - 1)), FormatError);
    CHECK_THROWS_AS(decode_patn(bytes + "x"), FormatError);
}
