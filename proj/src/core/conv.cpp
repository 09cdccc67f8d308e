#include "anonet/core/conv.hpp"

#include <Eigen/Core>
#include <algorithm>

#include "anonet/core/errors.hpp"

namespace anonet {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

// Upper bound on the number of elements in one patch-matrix tile.
constexpr std::size_t kTileBudget = std::size_t{1} << 20;

struct Geometry {
  std::size_t n, c, h, w;  // input
  std::size_t o, k, s, p;  // layer
  std::size_t ho, wo;      // output
  std::size_t patch() const { return c * k * k; }
};

template <typename T>
Geometry geometry(const Tensor<T>& input, const ConvParams<T>& p) {
  p.validate();
  const auto& in = input.shape();
  if (in.c != p.in_channels()) {
    throw ShapeError("conv2d: input has " + std::to_string(in.c) + " channels, layer expects " +
                     std::to_string(p.in_channels()));
  }
  const Shape4 out = conv2d_output_shape(in, p);
  return {in.n, in.c, in.h, in.w, p.out_channels(), p.kernel(), p.stride, p.pad(), out.h, out.w};
}

std::size_t tile_rows(const Geometry& g) {
  const std::size_t per_row = g.patch() * g.wo;
  return std::clamp<std::size_t>(kTileBudget / std::max<std::size_t>(per_row, 1), 1, g.ho);
}

// Fills col (patch x (rows*wo)) for output rows [oy0, oy0+rows) of one sample.
template <typename T>
void im2col(const T* x, const Geometry& g, std::size_t oy0, std::size_t rows, T* col) {
  const std::size_t cols = rows * g.wo;
  const auto H = static_cast<std::ptrdiff_t>(g.h);
  const auto W = static_cast<std::ptrdiff_t>(g.w);
  std::size_t r = 0;
  for (std::size_t c = 0; c < g.c; ++c) {
    const T* plane = x + c * g.h * g.w;
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx, ++r) {
        T* dst = col + r * cols;
        const auto dx = static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(g.p);
        for (std::size_t j = 0; j < rows; ++j) {
          T* d = dst + j * g.wo;
          const auto iy = static_cast<std::ptrdiff_t>((oy0 + j) * g.s + ky) -
                          static_cast<std::ptrdiff_t>(g.p);
          if (iy < 0 || iy >= H) {
            std::fill(d, d + g.wo, T(0));
            continue;
          }
          const T* src = plane + iy * W;
          if (g.s == 1) {
            // valid ox satisfies 0 <= ox + dx < W
            const std::ptrdiff_t lo = std::clamp<std::ptrdiff_t>(-dx, 0, W);
            const std::ptrdiff_t hi = std::clamp<std::ptrdiff_t>(W - dx, 0, W);
            std::fill(d, d + lo, T(0));
            if (hi > lo) std::copy(src + lo + dx, src + hi + dx, d + lo);
            std::fill(d + std::max(hi, lo), d + g.wo, T(0));
          } else {
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * g.s) + dx;
              d[ox] = (ix >= 0 && ix < W) ? src[ix] : T(0);
            }
          }
        }
      }
    }
  }
}

// Scatter-adds col back into the input gradient of one sample.
template <typename T>
void col2im(const T* col, const Geometry& g, std::size_t oy0, std::size_t rows, T* dx_img) {
  const std::size_t cols = rows * g.wo;
  const auto H = static_cast<std::ptrdiff_t>(g.h);
  const auto W = static_cast<std::ptrdiff_t>(g.w);
  std::size_t r = 0;
  for (std::size_t c = 0; c < g.c; ++c) {
    T* plane = dx_img + c * g.h * g.w;
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx, ++r) {
        const T* src = col + r * cols;
        const auto dx = static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(g.p);
        for (std::size_t j = 0; j < rows; ++j) {
          const auto iy = static_cast<std::ptrdiff_t>((oy0 + j) * g.s + ky) -
                          static_cast<std::ptrdiff_t>(g.p);
          if (iy < 0 || iy >= H) continue;
          T* d = plane + iy * W;
          const T* s = src + j * g.wo;
          if (g.s == 1) {
            const std::ptrdiff_t lo = std::clamp<std::ptrdiff_t>(-dx, 0, W);
            const std::ptrdiff_t hi = std::clamp<std::ptrdiff_t>(W - dx, 0, W);
            for (std::ptrdiff_t ox = lo; ox < hi; ++ox) d[ox + dx] += s[ox];
          } else {
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * g.s) + dx;
              if (ix >= 0 && ix < W) d[ix] += s[ox];
            }
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> forward_direct(const Tensor<T>& input, const ConvParams<T>& p, const Geometry& g) {
  Tensor<T> out({g.n, g.o, g.ho, g.wo});
  const auto H = static_cast<std::ptrdiff_t>(g.h);
  const auto W = static_cast<std::ptrdiff_t>(g.w);
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t o = 0; o < g.o; ++o) {
      for (std::size_t oy = 0; oy < g.ho; ++oy) {
        for (std::size_t ox = 0; ox < g.wo; ++ox) {
          double acc = static_cast<double>(p.bias[o]);
          for (std::size_t c = 0; c < g.c; ++c) {
            for (std::size_t ky = 0; ky < g.k; ++ky) {
              const auto iy = static_cast<std::ptrdiff_t>(oy * g.s + ky) -
                              static_cast<std::ptrdiff_t>(g.p);
              if (iy < 0 || iy >= H) continue;
              for (std::size_t kx = 0; kx < g.k; ++kx) {
                const auto ix = static_cast<std::ptrdiff_t>(ox * g.s + kx) -
                                static_cast<std::ptrdiff_t>(g.p);
                if (ix < 0 || ix >= W) continue;
                acc += static_cast<double>(p.weight.at(o, c, ky, kx)) *
                       static_cast<double>(input.at(n, c, static_cast<std::size_t>(iy),
                                                    static_cast<std::size_t>(ix)));
              }
            }
          }
          out.at(n, o, oy, ox) = static_cast<T>(acc);
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> forward_patch(const Tensor<T>& input, const ConvParams<T>& p, const Geometry& g) {
  Tensor<T> out({g.n, g.o, g.ho, g.wo});
  const std::size_t patch = g.patch();
  const std::size_t rows_per_tile = tile_rows(g);
  std::vector<T> col(patch * rows_per_tile * g.wo);
  Eigen::Map<const RowMat<T>> wm(p.weight.data(), static_cast<Eigen::Index>(g.o),
                                 static_cast<Eigen::Index>(patch));
  const auto plane = static_cast<Eigen::Index>(g.ho * g.wo);
  for (std::size_t n = 0; n < g.n; ++n) {
    const T* x = input.plane(n, 0);
    for (std::size_t oy0 = 0; oy0 < g.ho; oy0 += rows_per_tile) {
      const std::size_t rows = std::min(rows_per_tile, g.ho - oy0);
      const auto cols = static_cast<Eigen::Index>(rows * g.wo);
      im2col(x, g, oy0, rows, col.data());
      Eigen::Map<const RowMat<T>> cm(col.data(), static_cast<Eigen::Index>(patch), cols);
      StridedMap<T> om(out.plane(n, 0) + oy0 * g.wo, static_cast<Eigen::Index>(g.o), cols,
                       Eigen::OuterStride<>(plane));
      om.noalias() = wm * cm;
      for (std::size_t o = 0; o < g.o; ++o) om.row(static_cast<Eigen::Index>(o)).array() += p.bias[o];
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> backward_direct(const Tensor<T>& input, const ConvParams<T>& p,
                             const Tensor<T>& grad_out, const Geometry& g, ConvGradRequest want) {
  std::vector<double> dx(want.input ? input.size() : 0, 0.0);
  std::vector<double> dw(want.params ? p.weight.size() : 0, 0.0);
  std::vector<double> db(want.params ? g.o : 0, 0.0);
  const auto H = static_cast<std::ptrdiff_t>(g.h);
  const auto W = static_cast<std::ptrdiff_t>(g.w);
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t o = 0; o < g.o; ++o) {
      for (std::size_t oy = 0; oy < g.ho; ++oy) {
        for (std::size_t ox = 0; ox < g.wo; ++ox) {
          const double go = grad_out.at(n, o, oy, ox);
          if (want.params) db[o] += go;
          for (std::size_t c = 0; c < g.c; ++c) {
            for (std::size_t ky = 0; ky < g.k; ++ky) {
              const auto iy = static_cast<std::ptrdiff_t>(oy * g.s + ky) -
                              static_cast<std::ptrdiff_t>(g.p);
              if (iy < 0 || iy >= H) continue;
              for (std::size_t kx = 0; kx < g.k; ++kx) {
                const auto ix = static_cast<std::ptrdiff_t>(ox * g.s + kx) -
                                static_cast<std::ptrdiff_t>(g.p);
                if (ix < 0 || ix >= W) continue;
                const std::size_t xi = input.offset(n, c, static_cast<std::size_t>(iy),
                                                    static_cast<std::size_t>(ix));
                const std::size_t wi = p.weight.offset(o, c, ky, kx);
                if (want.params) dw[wi] += static_cast<double>(input[xi]) * go;
                if (want.input) dx[xi] += static_cast<double>(p.weight[wi]) * go;
              }
            }
          }
        }
      }
    }
  }
  ConvGrads<T> out;
  if (want.input) out.input = Tensor<T>(input.shape(), std::vector<T>(dx.begin(), dx.end()));
  if (want.params) {
    out.weight = Tensor<T>(p.weight.shape(), std::vector<T>(dw.begin(), dw.end()));
    out.bias.assign(db.begin(), db.end());
  }
  return out;
}

template <typename T>
ConvGrads<T> backward_patch(const Tensor<T>& input, const ConvParams<T>& p,
                            const Tensor<T>& grad_out, const Geometry& g, ConvGradRequest want) {
  const std::size_t patch = g.patch();
  const std::size_t rows_per_tile = tile_rows(g);
  const auto P = static_cast<Eigen::Index>(patch);
  const auto O = static_cast<Eigen::Index>(g.o);
  const auto plane = static_cast<Eigen::Index>(g.ho * g.wo);
  std::vector<T> col(patch * rows_per_tile * g.wo);
  std::vector<T> dcol(want.input ? col.size() : 0);

  ConvGrads<T> out;
  if (want.input) out.input = Tensor<T>(input.shape());
  RowMat<T> dw;
  std::vector<double> db;
  if (want.params) {
    dw = RowMat<T>::Zero(O, P);
    db.assign(g.o, 0.0);
  }
  Eigen::Map<const RowMat<T>> wm(p.weight.data(), O, P);

  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t oy0 = 0; oy0 < g.ho; oy0 += rows_per_tile) {
      const std::size_t rows = std::min(rows_per_tile, g.ho - oy0);
      const auto cols = static_cast<Eigen::Index>(rows * g.wo);
      ConstStridedMap<T> gm(grad_out.plane(n, 0) + oy0 * g.wo, O, cols,
                            Eigen::OuterStride<>(plane));
      if (want.params) {
        im2col(input.plane(n, 0), g, oy0, rows, col.data());
        Eigen::Map<const RowMat<T>> cm(col.data(), P, cols);
        dw.noalias() += gm * cm.transpose();
        for (std::size_t o = 0; o < g.o; ++o) {
          const T* row = grad_out.plane(n, o) + oy0 * g.wo;
          double acc = 0.0;
          for (Eigen::Index j = 0; j < cols; ++j) acc += static_cast<double>(row[j]);
          db[o] += acc;
        }
      }
      if (want.input) {
        Eigen::Map<RowMat<T>> dm(dcol.data(), P, cols);
        dm.noalias() = wm.transpose() * gm;
        col2im(dcol.data(), g, oy0, rows, out.input.plane(n, 0));
      }
    }
  }
  if (want.params) {
    out.weight = Tensor<T>(p.weight.shape(), std::vector<T>(dw.data(), dw.data() + dw.size()));
    out.bias.assign(db.begin(), db.end());
  }
  return out;
}

}  // namespace

template <typename T>
ConvParams<T>::ConvParams(std::size_t out_channels, std::size_t in_channels, std::size_t kernel,
                          std::size_t stride_, bool trainable_)
    : weight({out_channels, in_channels, kernel, kernel}),
      bias(out_channels, T(0)),
      stride(stride_),
      trainable(trainable_) {
  validate();
}

template <typename T>
void ConvParams<T>::validate() const {
  const auto& s = weight.shape();
  if (s.h != s.w) throw ConfigError("conv kernel must be square, got " + s.str());
  if (s.h % 2 == 0) throw ConfigError("conv kernel size must be odd, got " + std::to_string(s.h));
  if (stride < 1) throw ConfigError("conv stride must be >= 1");
  if (s.n == 0 || s.c == 0) throw ConfigError("conv layer needs at least one channel");
  if (bias.size() != s.n) throw ShapeError("conv bias length does not match output channels");
}

template <typename T>
Shape4 conv2d_output_shape(const Shape4& input, const ConvParams<T>& p) {
  const std::size_t k = p.kernel();
  const std::size_t pad = p.pad();
  auto extent = [&](std::size_t len) {
    return (len + 2 * pad - k) / p.stride + 1;  // == ceil(len / stride)
  };
  return {input.n, p.out_channels(), extent(input.h), extent(input.w)};
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvParams<T>& p, ConvPath path) {
  const Geometry g = geometry(input, p);
  return path == ConvPath::direct ? forward_direct(input, p, g) : forward_patch(input, p, g);
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const ConvParams<T>& p,
                             const Tensor<T>& grad_out, ConvGradRequest want, ConvPath path) {
  const Geometry g = geometry(input, p);
  const Shape4 expect{g.n, g.o, g.ho, g.wo};
  if (grad_out.shape() != expect) {
    throw ShapeError("conv2d_backward: grad_out " + grad_out.shape().str() + " but output is " +
                     expect.str());
  }
  return path == ConvPath::direct ? backward_direct(input, p, grad_out, g, want)
                                  : backward_patch(input, p, grad_out, g, want);
}

#define ANONET_INSTANTIATE_CONV(T)                                                          \
  template struct ConvParams<T>;                                                            \
  template Shape4 conv2d_output_shape<T>(const Shape4&, const ConvParams<T>&);              \
  template Tensor<T> conv2d_forward<T>(const Tensor<T>&, const ConvParams<T>&, ConvPath);   \
  template ConvGrads<T> conv2d_backward<T>(const Tensor<T>&, const ConvParams<T>&,          \
                                           const Tensor<T>&, ConvGradRequest, ConvPath);

ANONET_INSTANTIATE_CONV(float)
ANONET_INSTANTIATE_CONV(double)

}  // namespace anonet
