#pragma once

#include "posevid/tensor.hpp"

#include <cstddef>
#include <vector>

namespace posevid {

// First-frame part j corresponds to part j_prime of some later frame.
struct PartMatch {
    std::size_t j = 0;
    std::size_t j_prime = 0;
    double confidence = 0.0;

    friend bool operator==(const PartMatch&, const PartMatch&) = default;
};

// Token indices (frame-local) covered by each part.
using PartTokens = std::vector<std::vector<std::size_t>>;

struct PtcmWeights {
    Tensor wq;  // d × d
    Tensor wk;
    Tensor wv;
    Tensor wo;

    static PtcmWeights identity(std::size_t d);
    static PtcmWeights zeros(std::size_t d);
    std::size_t width() const { return wq.rows(); }
    void validate(std::size_t d) const;
};

struct PtcmPairCache {
    std::vector<std::size_t> rows_i;  // frame-i token rows (queries)
    std::vector<std::size_t> rows_0;  // frame-0 token rows (keys/values)
    Tensor xs;                        // selected frame-i tokens
    Tensor x0s;                       // selected frame-0 tokens
    Tensor q, k, v;
    Tensor weights;                   // softmax(q kᵀ / sqrt d)
    Tensor mixed;                     // weights · v, before the output projection
};

struct PtcmCache {
    Tensor::Shape x_shape;
    Tensor::Shape x0_shape;
    std::vector<PtcmPairCache> pairs;
};

// Part-aware cross attention for one frame against frame 0. For every match
// (j -> j'), queries come from the frame-i tokens of part j' and keys/values
// from the frame-0 tokens of part j; the projected attention output is added
// to those query rows. Rows outside every matched part are copied unchanged.
// Pairs with an empty token set on either side are skipped.
Tensor ptcm_forward(const Tensor& x, const Tensor& x0, const PartTokens& parts_i, const PartTokens& parts_0,
                    const std::vector<PartMatch>& matches, const PtcmWeights& w, PtcmCache* cache = nullptr);

struct PtcmGrads {
    Tensor dx;
    Tensor dx0;
    Tensor dwq;
    Tensor dwk;
    Tensor dwv;
    Tensor dwo;
};

// Gradients of <upstream, ptcm_forward(...)> with respect to every input.
PtcmGrads ptcm_backward(const Tensor& upstream, const PtcmCache& cache, const PtcmWeights& w);

}  // namespace posevid
