#pragma once

#include <cmath>
#include <vector>

#include "mva/gradcheck.hpp"
#include "mva/rng.hpp"
#include "mva/tensor.hpp"

namespace testutil {

inline mva::Tensor random_tensor(std::vector<int> shape, mva::Rng& rng, double lo = -1,
                                 double hi = 1) {
    mva::Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Direct four-loop convolution, independent of the im2col path.
inline mva::Tensor naive_conv2d(const mva::Tensor& x, const mva::Tensor& k, int stride,
                                int padding) {
    const int cin = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int cout = k.dim(0), kh = k.dim(2), kw = k.dim(3);
    const int oh = (h + 2 * padding - kh) / stride + 1;
    const int ow = (w + 2 * padding - kw) / stride + 1;
    mva::Tensor out = mva::Tensor::zeros({cout, oh, ow});
    for (int co = 0; co < cout; ++co)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = 0;
                for (int ci = 0; ci < cin; ++ci)
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            const int iy = oy * stride + ky - padding;
                            const int ix = ox * stride + kx - padding;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                            acc += x.at(ci, iy, ix) *
                                   k[((static_cast<std::size_t>(co) * cin + ci) * kh + ky) * kw +
                                     kx];
                        }
                out.at(co, oy, ox) = acc;
            }
    return out;
}

}  // namespace testutil
