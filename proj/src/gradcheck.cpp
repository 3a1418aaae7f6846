#include "posevid/gradcheck.hpp"

#include "posevid/error.hpp"
#include "posevid/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace posevid {

double relative_error(const Tensor& a, const Tensor& b)
{
    if (a.shape() != b.shape()) {
        throw DimensionError("relative_error: shapes differ");
    }
    return frobenius_norm(subtract(a, b)) / std::max(frobenius_norm(a) + frobenius_norm(b), 1e-12);
}

namespace {

std::vector<std::size_t> random_subset(std::size_t n, CounterRng& rng)
{
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    const auto k = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(n)));
    for (std::size_t i = 0; i < k; ++i) {
        const auto pick = static_cast<std::size_t>(
            rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(n - 1)));
        std::swap(pool[i], pool[pick]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace

GradcheckCase random_gradcheck_case(std::uint64_t seed, const GradcheckOptions& opt)
{
    if (opt.width == 0 || opt.parts == 0 || opt.max_tokens < opt.parts || !(opt.eps > 0.0)) {
        throw DomainError("gradcheck: need width, parts >= 1, max_tokens >= parts and eps > 0");
    }
    CounterRng rng(seed, 0x67C4ull);
    const auto lo = static_cast<std::int64_t>(opt.parts);
    const auto hi = static_cast<std::int64_t>(opt.max_tokens);
    const auto n_i = static_cast<std::size_t>(rng.uniform_int(lo, hi));
    const auto n_0 = static_cast<std::size_t>(rng.uniform_int(lo, hi));
    const double ws = 1.0 / std::sqrt(static_cast<double>(opt.width));

    GradcheckCase c;
    c.x = Tensor::random_normal({n_i, opt.width}, rng);
    c.x0 = Tensor::random_normal({n_0, opt.width}, rng);
    c.upstream = Tensor::random_normal({n_i, opt.width}, rng);
    c.weights = {Tensor::random_normal({opt.width, opt.width}, rng, ws),
                 Tensor::random_normal({opt.width, opt.width}, rng, ws),
                 Tensor::random_normal({opt.width, opt.width}, rng, ws),
                 Tensor::random_normal({opt.width, opt.width}, rng, ws)};
    for (std::size_t p = 0; p < opt.parts; ++p) {
        c.parts_i.push_back(random_subset(n_i, rng));
        c.parts_0.push_back(random_subset(n_0, rng));
    }
    for (std::size_t j = 0; j < opt.parts; ++j) {
        const auto jp = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(opt.parts) - 1));
        c.matches.push_back({j, jp, 1.0});
    }
    return c;
}

double GradcheckResult::worst() const
{
    return std::max({wq, wk, wv, wo, x, x0});
}

GradcheckResult ptcm_gradcheck(std::uint64_t seed, const GradcheckOptions& opt)
{
    const GradcheckCase c = random_gradcheck_case(seed, opt);
    PtcmCache cache;
    ptcm_forward(c.x, c.x0, c.parts_i, c.parts_0, c.matches, c.weights, &cache);
    const PtcmGrads g = ptcm_backward(c.upstream, cache, c.weights);

    auto loss = [&](const Tensor& x, const Tensor& x0, const PtcmWeights& w) {
        return dot(c.upstream, ptcm_forward(x, x0, c.parts_i, c.parts_0, c.matches, w));
    };
    auto weight_grad = [&](Tensor PtcmWeights::*member) {
        return finite_diff_grad(
            [&](const Tensor& m) {
                PtcmWeights w = c.weights;
                w.*member = m;
                return loss(c.x, c.x0, w);
            },
            c.weights.*member, opt.eps);
    };

    GradcheckResult r;
    r.seed = seed;
    r.wq = relative_error(g.dwq, weight_grad(&PtcmWeights::wq));
    r.wk = relative_error(g.dwk, weight_grad(&PtcmWeights::wk));
    r.wv = relative_error(g.dwv, weight_grad(&PtcmWeights::wv));
    r.wo = relative_error(g.dwo, weight_grad(&PtcmWeights::wo));
    r.x = relative_error(g.dx, finite_diff_grad([&](const Tensor& x) { return loss(x, c.x0, c.weights); }, c.x, opt.eps));
    r.x0 = relative_error(g.dx0,
                          finite_diff_grad([&](const Tensor& x0) { return loss(c.x, x0, c.weights); }, c.x0, opt.eps));
    return r;
}

}  // namespace posevid
