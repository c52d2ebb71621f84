#include "venibot/nn/kernels.hpp"

#include <Eigen/Core>
#include <vector>

#include "venibot/errors.hpp"

namespace venibot::nn {

void ConvSpec::validate() const {
  if (in_c <= 0 || out_c <= 0 || k <= 0 || stride <= 0 || pad < 0 || groups <= 0)
    throw ParameterError("conv: sizes must be positive");
  if (in_c % groups != 0 || out_c % groups != 0)
    throw ParameterError("conv: groups=" + std::to_string(groups) + " must divide in=" + std::to_string(in_c) +
                         " and out=" + std::to_string(out_c));
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

// Unfolds `cg` input planes of size h x w into a (cg*k*k) x (ho*wo) matrix.
template <typename T>
void im2col(const T* x, int cg, int h, int w, const ConvSpec& s, int ho, int wo, T* col) {
  const std::size_t cols = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < cg; ++c)
    for (int ky = 0; ky < s.k; ++ky)
      for (int kx = 0; kx < s.k; ++kx) {
        T* row = col + ((static_cast<std::size_t>(c) * s.k + ky) * s.k + kx) * cols;
        const T* plane = x + static_cast<std::size_t>(c) * h * w;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * s.stride - s.pad + ky;
          T* dst = row + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + wo, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * s.stride - s.pad + kx;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
        }
      }
}

// Adjoint of im2col: scatters a column matrix back onto the planes (accumulating).
template <typename T>
void col2im(const T* col, int cg, int h, int w, const ConvSpec& s, int ho, int wo, T* x) {
  const std::size_t cols = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < cg; ++c)
    for (int ky = 0; ky < s.k; ++ky)
      for (int kx = 0; kx < s.k; ++kx) {
        const T* row = col + ((static_cast<std::size_t>(c) * s.k + ky) * s.k + kx) * cols;
        T* plane = x + static_cast<std::size_t>(c) * h * w;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * s.stride - s.pad + ky;
          if (iy < 0 || iy >= h) continue;
          const T* src = row + static_cast<std::size_t>(oy) * wo;
          T* dst = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * s.stride - s.pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
}

void check_dims(const Shape& x, const Shape& y, const Shape& w, const ConvSpec& s, const char* who) {
  if (x.c != s.in_c || y.c != s.out_c || x.n != y.n || !(w == s.weight_shape()))
    throw GraphError(std::string(who) + ": x" + x.str() + " y" + y.str() + " w" + w.str() +
                     " disagree with the conv spec");
  if (y.h != s.out_h(x.h) || y.w != s.out_w(x.w))
    throw GraphError(std::string(who) + ": output " + y.str() + " does not follow from input " + x.str());
}

// For transposed use, dx may be taller/wider than the stride covers; only the
// forward relation ho = out_h(h) has to hold up to the output padding.
void check_dims_loose(const Shape& x, const Shape& y, const Shape& w, const ConvSpec& s, const char* who) {
  if (x.c != s.in_c || y.c != s.out_c || x.n != y.n || !(w == s.weight_shape()))
    throw GraphError(std::string(who) + ": x" + x.str() + " y" + y.str() + " w" + w.str() +
                     " disagree with the conv spec");
  const int extra_h = x.h - ((y.h - 1) * s.stride - 2 * s.pad + s.k);
  const int extra_w = x.w - ((y.w - 1) * s.stride - 2 * s.pad + s.k);
  if (extra_h < 0 || extra_h >= s.stride || extra_w < 0 || extra_w >= s.stride)
    throw GraphError(std::string(who) + ": input " + x.str() + " inconsistent with output " + y.str());
}

}  // namespace

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const T* bias, const ConvSpec& s, Tensor<T>& y) {
  check_dims(x.shape(), y.shape(), w.shape(), s, "conv2d_forward");
  const Shape xs = x.shape(), ys = y.shape();
  const int cg = s.in_c / s.groups, og = s.out_c / s.groups;
  const int kk = cg * s.k * s.k;
  const int cols = ys.h * ys.w;
  const int jobs = xs.n * s.groups;
#pragma omp parallel
  {
    std::vector<T> col;
    if (!s.pointwise()) col.resize(static_cast<std::size_t>(kk) * cols);
#pragma omp for schedule(static)
    for (int job = 0; job < jobs; ++job) {
      const int n = job / s.groups, g = job % s.groups;
      const T* xg = x.plane(n, g * cg);
      if (!s.pointwise()) im2col(xg, cg, xs.h, xs.w, s, ys.h, ys.w, col.data());
      const T* cptr = s.pointwise() ? xg : col.data();
      CMapMat<T> W(w.data() + static_cast<std::size_t>(g) * og * kk, og, kk);
      CMapMat<T> C(cptr, kk, cols);
      MapMat<T> Y(y.plane(n, g * og), og, cols);
      Y.noalias() = W * C;
      if (bias)
        for (int o = 0; o < og; ++o) Y.row(o).array() += bias[g * og + o];
    }
  }
}

template <typename T>
void conv2d_backward_input(const Tensor<T>& dy, const Tensor<T>& w, const ConvSpec& s, Tensor<T>& dx) {
  check_dims_loose(dx.shape(), dy.shape(), w.shape(), s, "conv2d_backward_input");
  const Shape xs = dx.shape(), ys = dy.shape();
  const int cg = s.in_c / s.groups, og = s.out_c / s.groups;
  const int kk = cg * s.k * s.k;
  const int cols = ys.h * ys.w;
  const int jobs = xs.n * s.groups;
#pragma omp parallel
  {
    std::vector<T> col(static_cast<std::size_t>(kk) * cols);
#pragma omp for schedule(static)
    for (int job = 0; job < jobs; ++job) {
      const int n = job / s.groups, g = job % s.groups;
      CMapMat<T> W(w.data() + static_cast<std::size_t>(g) * og * kk, og, kk);
      CMapMat<T> DY(dy.plane(n, g * og), og, cols);
      T* dxg = dx.plane(n, g * cg);
      if (s.pointwise() && xs.h == ys.h && xs.w == ys.w) {
        MapMat<T>(dxg, cg, cols).noalias() += W.transpose() * DY;
        continue;
      }
      MapMat<T> C(col.data(), kk, cols);
      C.noalias() = W.transpose() * DY;
      col2im(col.data(), cg, xs.h, xs.w, s, ys.h, ys.w, dxg);
    }
  }
}

template <typename T>
void conv2d_backward_weight(const Tensor<T>& x, const Tensor<T>& dy, const ConvSpec& s, Tensor<T>& dw, T* db) {
  check_dims_loose(x.shape(), dy.shape(), dw.shape(), s, "conv2d_backward_weight");
  const Shape xs = x.shape(), ys = dy.shape();
  const int cg = s.in_c / s.groups, og = s.out_c / s.groups;
  const int kk = cg * s.k * s.k;
  const int cols = ys.h * ys.w;
  const int jobs = xs.n * s.groups;
  const std::size_t wsize = dw.size();
  // One partial gradient per sample, summed afterwards in sample order.
  std::vector<T> partial(static_cast<std::size_t>(xs.n) * wsize);
  const bool direct = s.pointwise() && xs.h == ys.h && xs.w == ys.w;
#pragma omp parallel
  {
    std::vector<T> col;
    if (!direct) col.resize(static_cast<std::size_t>(kk) * cols);
#pragma omp for schedule(static)
    for (int job = 0; job < jobs; ++job) {
      const int n = job / s.groups, g = job % s.groups;
      const T* xg = x.plane(n, g * cg);
      if (!direct) im2col(xg, cg, xs.h, xs.w, s, ys.h, ys.w, col.data());
      CMapMat<T> C(direct ? xg : col.data(), kk, cols);
      CMapMat<T> DY(dy.plane(n, g * og), og, cols);
      MapMat<T> DW(partial.data() + n * wsize + static_cast<std::size_t>(g) * og * kk, og, kk);
      DW.noalias() = DY * C.transpose();
    }
  }
  T* out = dw.data();
#pragma omp parallel for schedule(static) if (wsize > 4096)
  for (std::size_t i = 0; i < wsize; ++i) {
    T acc = out[i];
    for (int n = 0; n < xs.n; ++n) acc += partial[n * wsize + i];
    out[i] = acc;
  }
  if (db) {
#pragma omp parallel for schedule(static)
    for (int o = 0; o < s.out_c; ++o) {
      T acc = db[o];
      for (int n = 0; n < xs.n; ++n) {
        const T* p = dy.plane(n, o);
        T sum = 0;
        for (int i = 0; i < cols; ++i) sum += p[i];
        acc += sum;
      }
      db[o] = acc;
    }
  }
}

namespace reference {

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const T* bias, const ConvSpec& s, Tensor<T>& y) {
  check_dims(x.shape(), y.shape(), w.shape(), s, "reference::conv2d_forward");
  const Shape xs = x.shape(), ys = y.shape();
  const int cg = s.in_c / s.groups, og = s.out_c / s.groups;
  for (int n = 0; n < xs.n; ++n)
    for (int o = 0; o < s.out_c; ++o) {
      const int g = o / og;
      for (int oy = 0; oy < ys.h; ++oy)
        for (int ox = 0; ox < ys.w; ++ox) {
          T acc = bias ? bias[o] : T(0);
          for (int c = 0; c < cg; ++c)
            for (int ky = 0; ky < s.k; ++ky)
              for (int kx = 0; kx < s.k; ++kx) {
                const int iy = oy * s.stride - s.pad + ky, ix = ox * s.stride - s.pad + kx;
                if (iy < 0 || iy >= xs.h || ix < 0 || ix >= xs.w) continue;
                acc += w.at(o, c, ky, kx) * x.at(n, g * cg + c, iy, ix);
              }
          y.at(n, o, oy, ox) = acc;
        }
    }
}

template <typename T>
void conv2d_backward_input(const Tensor<T>& dy, const Tensor<T>& w, const ConvSpec& s, Tensor<T>& dx) {
  check_dims_loose(dx.shape(), dy.shape(), w.shape(), s, "reference::conv2d_backward_input");
  const Shape xs = dx.shape(), ys = dy.shape();
  const int cg = s.in_c / s.groups, og = s.out_c / s.groups;
  for (int n = 0; n < xs.n; ++n)
    for (int o = 0; o < s.out_c; ++o) {
      const int g = o / og;
      for (int oy = 0; oy < ys.h; ++oy)
        for (int ox = 0; ox < ys.w; ++ox) {
          const T gy = dy.at(n, o, oy, ox);
          for (int c = 0; c < cg; ++c)
            for (int ky = 0; ky < s.k; ++ky)
              for (int kx = 0; kx < s.k; ++kx) {
                const int iy = oy * s.stride - s.pad + ky, ix = ox * s.stride - s.pad + kx;
                if (iy < 0 || iy >= xs.h || ix < 0 || ix >= xs.w) continue;
                dx.at(n, g * cg + c, iy, ix) += w.at(o, c, ky, kx) * gy;
              }
        }
    }
}

template <typename T>
void conv2d_backward_weight(const Tensor<T>& x, const Tensor<T>& dy, const ConvSpec& s, Tensor<T>& dw, T* db) {
  check_dims_loose(x.shape(), dy.shape(), dw.shape(), s, "reference::conv2d_backward_weight");
  const Shape xs = x.shape(), ys = dy.shape();
  const int cg = s.in_c / s.groups, og = s.out_c / s.groups;
  for (int n = 0; n < xs.n; ++n)
    for (int o = 0; o < s.out_c; ++o) {
      const int g = o / og;
      for (int oy = 0; oy < ys.h; ++oy)
        for (int ox = 0; ox < ys.w; ++ox) {
          const T gy = dy.at(n, o, oy, ox);
          if (db) db[o] += gy;
          for (int c = 0; c < cg; ++c)
            for (int ky = 0; ky < s.k; ++ky)
              for (int kx = 0; kx < s.k; ++kx) {
                const int iy = oy * s.stride - s.pad + ky, ix = ox * s.stride - s.pad + kx;
                if (iy < 0 || iy >= xs.h || ix < 0 || ix >= xs.w) continue;
                dw.at(o, c, ky, kx) += x.at(n, g * cg + c, iy, ix) * gy;
              }
        }
    }
}

}  // namespace reference

#define VENIBOT_CONV_INSTANTIATE(T)                                                                       \
  template void conv2d_forward<T>(const Tensor<T>&, const Tensor<T>&, const T*, const ConvSpec&, Tensor<T>&); \
  template void conv2d_backward_input<T>(const Tensor<T>&, const Tensor<T>&, const ConvSpec&, Tensor<T>&);    \
  template void conv2d_backward_weight<T>(const Tensor<T>&, const Tensor<T>&, const ConvSpec&, Tensor<T>&, T*); \
  template void reference::conv2d_forward<T>(const Tensor<T>&, const Tensor<T>&, const T*, const ConvSpec&,      \
                                             Tensor<T>&);                                                     \
  template void reference::conv2d_backward_input<T>(const Tensor<T>&, const Tensor<T>&, const ConvSpec&,         \
                                                    Tensor<T>&);                                              \
  template void reference::conv2d_backward_weight<T>(const Tensor<T>&, const Tensor<T>&, const ConvSpec&,        \
                                                     Tensor<T>&, T*);

VENIBOT_CONV_INSTANTIATE(float)
VENIBOT_CONV_INSTANTIATE(double)

}  // namespace venibot::nn
