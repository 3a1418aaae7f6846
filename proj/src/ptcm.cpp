#include "posevid/ptcm.hpp"

#include "posevid/error.hpp"

#include <cmath>

namespace posevid {

namespace {

void check_rows(const std::vector<std::size_t>& rows, std::size_t limit, const char* which)
{
    for (auto r : rows) {
        if (r >= limit) {
            throw DomainError(std::string("ptcm: ") + which + " token index " + std::to_string(r) +
                              " out of range (" + std::to_string(limit) + " tokens)");
        }
    }
}

}  // namespace

PtcmWeights PtcmWeights::identity(std::size_t d)
{
    return {Tensor::identity(d), Tensor::identity(d), Tensor::identity(d), Tensor::identity(d)};
}

PtcmWeights PtcmWeights::zeros(std::size_t d)
{
    return {Tensor({d, d}), Tensor({d, d}), Tensor({d, d}), Tensor({d, d})};
}

void PtcmWeights::validate(std::size_t d) const
{
    for (const Tensor* m : {&wq, &wk, &wv, &wo}) {
        if (m->rank() != 2 || m->rows() != d || m->cols() != d) {
            throw DimensionError("ptcm: projections must be " + std::to_string(d) + "x" + std::to_string(d));
        }
    }
}

Tensor ptcm_forward(const Tensor& x, const Tensor& x0, const PartTokens& parts_i, const PartTokens& parts_0,
                    const std::vector<PartMatch>& matches, const PtcmWeights& w, PtcmCache* cache)
{
    if (x.rank() != 2 || x0.rank() != 2 || x.cols() != x0.cols()) {
        throw DimensionError("ptcm: token matrices must share their width");
    }
    const std::size_t d = x.cols();
    w.validate(d);
    for (const auto& m : matches) {
        if (m.j >= parts_0.size()) {
            throw DomainError("ptcm: match references unknown first-frame part " + std::to_string(m.j));
        }
        if (m.j_prime >= parts_i.size()) {
            throw DomainError("ptcm: match references unknown frame part " + std::to_string(m.j_prime));
        }
    }
    if (cache) {
        cache->x_shape = x.shape();
        cache->x0_shape = x0.shape();
        cache->pairs.clear();
    }

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    Tensor out = x;
    for (const auto& m : matches) {
        const auto& rows_i = parts_i[m.j_prime];
        const auto& rows_0 = parts_0[m.j];
        if (rows_i.empty() || rows_0.empty()) {
            continue;
        }
        check_rows(rows_i, x.rows(), "frame");
        check_rows(rows_0, x0.rows(), "first-frame");

        PtcmPairCache pc;
        pc.xs = gather_rows(x, rows_i);
        pc.x0s = gather_rows(x0, rows_0);
        pc.q = matmul(pc.xs, w.wq);
        pc.k = matmul(pc.x0s, w.wk);
        pc.v = matmul(pc.x0s, w.wv);
        pc.weights = softmax_rows(scale(matmul(pc.q, transpose(pc.k)), inv_sqrt_d));
        pc.mixed = matmul(pc.weights, pc.v);
        scatter_add_rows(out, rows_i, matmul(pc.mixed, w.wo));
        if (cache) {
            pc.rows_i = rows_i;
            pc.rows_0 = rows_0;
            cache->pairs.push_back(std::move(pc));
        }
    }
    require_finite(out, "ptcm_forward");
    return out;
}

PtcmGrads ptcm_backward(const Tensor& upstream, const PtcmCache& cache, const PtcmWeights& w)
{
    if (upstream.shape() != cache.x_shape) {
        throw DimensionError("ptcm_backward: upstream gradient " + shape_string(upstream.shape()) +
                             " does not match cached output " + shape_string(cache.x_shape));
    }
    const std::size_t d = upstream.cols();
    w.validate(d);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

    PtcmGrads g;
    g.dx = upstream;  // residual path
    g.dx0 = Tensor(cache.x0_shape);
    g.dwq = Tensor({d, d});
    g.dwk = Tensor({d, d});
    g.dwv = Tensor({d, d});
    g.dwo = Tensor({d, d});

    for (const auto& pc : cache.pairs) {
        const Tensor gout = gather_rows(upstream, pc.rows_i);  // a × d

        g.dwo = add(g.dwo, matmul(transpose(pc.mixed), gout));
        const Tensor dmixed = matmul(gout, transpose(w.wo));
        const Tensor dweights = matmul(dmixed, transpose(pc.v));
        const Tensor dv = matmul(transpose(pc.weights), dmixed);

        // Softmax backward, row by row: ds = p ⊙ (dp - <dp, p>).
        Tensor dscores(pc.weights.shape());
        for (std::size_t r = 0; r < pc.weights.rows(); ++r) {
            double inner = 0.0;
            for (std::size_t c = 0; c < pc.weights.cols(); ++c) {
                inner += dweights.at(r, c) * pc.weights.at(r, c);
            }
            for (std::size_t c = 0; c < pc.weights.cols(); ++c) {
                dscores.at(r, c) = pc.weights.at(r, c) * (dweights.at(r, c) - inner) * inv_sqrt_d;
            }
        }
        const Tensor dq = matmul(dscores, pc.k);
        const Tensor dk = matmul(transpose(dscores), pc.q);

        g.dwq = add(g.dwq, matmul(transpose(pc.xs), dq));
        g.dwk = add(g.dwk, matmul(transpose(pc.x0s), dk));
        g.dwv = add(g.dwv, matmul(transpose(pc.x0s), dv));

        scatter_add_rows(g.dx, pc.rows_i, matmul(dq, transpose(w.wq)));
        scatter_add_rows(g.dx0, pc.rows_0, add(matmul(dk, transpose(w.wk)), matmul(dv, transpose(w.wv))));
    }
    return g;
}

}  // namespace posevid
