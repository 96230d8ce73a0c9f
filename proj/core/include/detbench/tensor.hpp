#pragma once

#include <cstddef>
#include <vector>

#include "detbench/errors.hpp"

namespace detbench {

/// Dense NCHW float tensor. Toy scale: plain vector storage, no strides.
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<float> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_, float fill = 0.0f) : n(n_), c(c_), h(h_), w(w_) {
    if (n < 1 || c < 1 || h < 1 || w < 1) raise(Errc::shape_mismatch, "tensor dims must be >= 1");
    data.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(c) *
                    static_cast<std::size_t>(h) * static_cast<std::size_t>(w),
                fill);
  }

  std::size_t size() const { return data.size(); }

  std::size_t index(int in, int ic, int iy, int ix) const {
    return ((static_cast<std::size_t>(in) * static_cast<std::size_t>(c) +
             static_cast<std::size_t>(ic)) *
                static_cast<std::size_t>(h) +
            static_cast<std::size_t>(iy)) *
               static_cast<std::size_t>(w) +
           static_cast<std::size_t>(ix);
  }

  float at(int in, int ic, int iy, int ix) const { return data[index(in, ic, iy, ix)]; }
  float& at(int in, int ic, int iy, int ix) { return data[index(in, ic, iy, ix)]; }

  bool same_shape(const Tensor4& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

}  // namespace detbench
