#pragma once

#include "posevid/ptcm.hpp"
#include "posevid/tensor.hpp"

#include <cstdint>

namespace posevid {

// ||a - b|| / max(||a|| + ||b||, 1e-12), Frobenius norms.
double relative_error(const Tensor& a, const Tensor& b);

struct GradcheckOptions {
    std::size_t width = 8;
    std::size_t parts = 2;
    std::size_t max_tokens = 16;
    double eps = 1e-4;
};

struct GradcheckCase {
    Tensor x, x0, upstream;
    PartTokens parts_i, parts_0;
    std::vector<PartMatch> matches;
    PtcmWeights weights;
};

// Random PTCM instance: token counts in [parts, max_tokens], every part non-empty.
GradcheckCase random_gradcheck_case(std::uint64_t seed, const GradcheckOptions& opt);

struct GradcheckResult {
    std::uint64_t seed = 0;
    double wq = 0.0, wk = 0.0, wv = 0.0, wo = 0.0, x = 0.0, x0 = 0.0;

    double worst() const;
};

// Analytic gradients of <upstream, ptcm_forward> against central differences.
GradcheckResult ptcm_gradcheck(std::uint64_t seed, const GradcheckOptions& opt = {});

}  // namespace posevid
