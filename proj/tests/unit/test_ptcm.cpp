#include <doctest.h>

#include "posevid/error.hpp"
#include "posevid/gradcheck.hpp"
#include "posevid/ptcm.hpp"
#include "posevid/rng.hpp"

using namespace posevid;

TEST_CASE("empty assignment is the identity")
{
    CounterRng rng(1);
    const Tensor x = Tensor::random_normal({5, 4}, rng);
    const Tensor x0 = Tensor::random_normal({5, 4}, rng);
    const PartTokens parts{{0, 1}};
    CHECK(ptcm_forward(x, x0, parts, parts, {}, PtcmWeights::identity(4)) == x);
}

TEST_CASE("single key with identity projections adds the first-frame token")
{
    const Tensor x = Tensor::from_rows({{1, 2}, {3, 4}});
    const Tensor x0 = Tensor::from_rows({{10, 20}, {30, 40}});
    const PartTokens parts_i{{1}};
    const PartTokens parts_0{{0}};
    const Tensor out = ptcm_forward(x, x0, parts_i, parts_0, {{0, 0, 1.0}}, PtcmWeights::identity(2));
    CHECK(out == Tensor::from_rows({{1, 2}, {13, 24}}));
}

TEST_CASE("rows outside every matched part are bit-identical")
{
    CounterRng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor x = Tensor::random_normal({9, 6}, rng);
        const Tensor x0 = Tensor::random_normal({7, 6}, rng);
        const PartTokens parts_i{{0, 2}, {5}};
        const PartTokens parts_0{{1, 3, 4}, {6}};
        const PtcmWeights w{Tensor::random_normal({6, 6}, rng), Tensor::random_normal({6, 6}, rng),
                            Tensor::random_normal({6, 6}, rng), Tensor::random_normal({6, 6}, rng)};
        const Tensor out = ptcm_forward(x, x0, parts_i, parts_0, {{0, 1, 0.5}, {1, 0, 0.5}}, w);
        for (std::size_t r : {1, 3, 4, 6, 7, 8}) {
            for (std::size_t c = 0; c < 6; ++c) {
                CHECK(out.at(r, c) == x.at(r, c));
            }
        }
    }
}

TEST_CASE("empty token sets skip the pair; bad indices throw")
{
    const Tensor x = Tensor::from_rows({{1, 2}});
    const PartTokens with_empty{{}};
    const PartTokens one{{0}};
    CHECK(ptcm_forward(x, x, with_empty, one, {{0, 0, 1.0}}, PtcmWeights::identity(2)) == x);
    CHECK_THROWS_AS(ptcm_forward(x, x, one, one, {{1, 0, 1.0}}, PtcmWeights::identity(2)), DomainError);
    CHECK_THROWS_AS(ptcm_forward(x, x, one, one, {{0, 3, 1.0}}, PtcmWeights::identity(2)), DomainError);
    const PartTokens far{{4}};
    CHECK_THROWS_AS(ptcm_forward(x, x, far, one, {{0, 0, 1.0}}, PtcmWeights::identity(2)), DomainError);
    CHECK_THROWS_AS(ptcm_forward(x, x, one, one, {{0, 0, 1.0}}, PtcmWeights::identity(3)), DimensionError);
}

TEST_CASE("backward: zero upstream gives zero gradients")
{
    const GradcheckCase c = random_gradcheck_case(3, {});
    PtcmCache cache;
    ptcm_forward(c.x, c.x0, c.parts_i, c.parts_0, c.matches, c.weights, &cache);
    const PtcmGrads g = ptcm_backward(Tensor(c.x.shape()), cache, c.weights);
    for (const Tensor* t : {&g.dx, &g.dx0, &g.dwq, &g.dwk, &g.dwv, &g.dwo}) {
        CHECK(frobenius_norm(*t) == 0.0);
    }
    CHECK_THROWS_AS(ptcm_backward(Tensor({1, 8}), cache, c.weights), DimensionError);
}

TEST_CASE("backward: scalar toy by hand")
{
    // d = 1, one token each side: out = x + x0 * wv * wo (softmax over one key is 1).
    const double x = 0.7, x0 = -1.3, wq = 0.4, wk = 2.0, wv = 1.5, wo = -0.6, u = 2.5;
    const PtcmWeights w{Tensor({1, 1}, wq), Tensor({1, 1}, wk), Tensor({1, 1}, wv), Tensor({1, 1}, wo)};
    const PartTokens p{{0}};
    PtcmCache cache;
    const Tensor out = ptcm_forward(Tensor({1, 1}, x), Tensor({1, 1}, x0), p, p, {{0, 0, 1.0}}, w, &cache);
    CHECK(out[0] == doctest::Approx(x + x0 * wv * wo));
    const PtcmGrads g = ptcm_backward(Tensor({1, 1}, u), cache, w);
    CHECK(g.dx[0] == doctest::Approx(u));
    CHECK(g.dx0[0] == doctest::Approx(u * wv * wo));
    CHECK(g.dwv[0] == doctest::Approx(u * x0 * wo));
    CHECK(g.dwo[0] == doctest::Approx(u * x0 * wv));
    CHECK(g.dwq[0] == doctest::Approx(0.0));
    CHECK(g.dwk[0] == doctest::Approx(0.0));
}

TEST_CASE("backward agrees with central differences")
{
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
        const GradcheckCase c = random_gradcheck_case(seed, {});
        PtcmCache cache;
        ptcm_forward(c.x, c.x0, c.parts_i, c.parts_0, c.matches, c.weights, &cache);
        const PtcmGrads g = ptcm_backward(c.upstream, cache, c.weights);
        const auto loss_w = [&](int which) {
            return [&, which](const Tensor& m) {
                PtcmWeights w = c.weights;
                (which == 0 ? w.wq : which == 1 ? w.wk : which == 2 ? w.wv : w.wo) = m;
                return dot(c.upstream, ptcm_forward(c.x, c.x0, c.parts_i, c.parts_0, c.matches, w));
            };
        };
        CHECK(relative_error(g.dwq, finite_diff_grad(loss_w(0), c.weights.wq, 1e-4)) < 1e-4);
        CHECK(relative_error(g.dwk, finite_diff_grad(loss_w(1), c.weights.wk, 1e-4)) < 1e-4);
        CHECK(relative_error(g.dwv, finite_diff_grad(loss_w(2), c.weights.wv, 1e-4)) < 1e-4);
        CHECK(relative_error(g.dwo, finite_diff_grad(loss_w(3), c.weights.wo, 1e-4)) < 1e-4);
        const auto loss_x0 = [&](const Tensor& x0) {
            return dot(c.upstream, ptcm_forward(c.x, x0, c.parts_i, c.parts_0, c.matches, c.weights));
        };
        CHECK(relative_error(g.dx0, finite_diff_grad(loss_x0, c.x0, 1e-4)) < 1e-4);
    }
}

TEST_CASE("library gradcheck helper reports small errors")
{
    const GradcheckResult r = ptcm_gradcheck(7);
    CHECK(r.worst() < 1e-4);
}
