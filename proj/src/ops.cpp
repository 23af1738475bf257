#include "ggt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ggt {

namespace {

void require_rank(const Shape& s, std::size_t rank, const char* op) {
    if (s.size() != rank) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                             shape_str(s));
    }
}

template <typename T>
T normal_cdf(T x) {
    return T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
T normal_pdf(T x) {
    return std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * std::numbers::pi_v<T>);
}

} // namespace

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_rank(a.shape(), 2, "matmul");
    require_rank(b.shape(), 2, "matmul");
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    BasicTensor<T> c({m, n});
    const T* pa = a.data().data();
    const T* pb = b.data().data();
    T* pc = c.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = pc + i * n;
        for (std::size_t t = 0; t < k; ++t) {
            const T av = pa[i * k + t];
            const T* brow = pb + t * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
    require_rank(a.shape(), 2, "transpose");
    const std::size_t m = a.rows(), n = a.cols();
    BasicTensor<T> out({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
    return out;
}

template <typename T>
BasicTensor<T> softmax_rows(const BasicTensor<T>& x) {
    require_rank(x.shape(), 2, "softmax_rows");
    const std::size_t m = x.rows(), n = x.cols();
    BasicTensor<T> y(x.shape());
    for (std::size_t i = 0; i < m; ++i) {
        const T* in = x.data().data() + i * n;
        T* out = y.data().data() + i * n;
        T mx = in[0];
        for (std::size_t j = 0; j < n; ++j) {
            if (std::isnan(in[j])) throw NumericError("softmax_rows: NaN input");
            mx = std::max(mx, in[j]);
        }
        if (!std::isfinite(mx)) throw NumericError("softmax_rows: non-finite input");
        T sum = 0;
        for (std::size_t j = 0; j < n; ++j) {
            out[j] = std::exp(in[j] - mx);
            sum += out[j];
        }
        const T inv = T(1) / sum;
        for (std::size_t j = 0; j < n; ++j) out[j] *= inv;
    }
    return y;
}

template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                          double eps) {
    const std::size_t c = x.shape().back();
    if (gamma.numel() != c || beta.numel() != c) {
        throw DimensionError("layer_norm: channel extent " + std::to_string(c) + " vs gamma " +
                             shape_str(gamma.shape()) + ", beta " + shape_str(beta.shape()));
    }
    const std::size_t rows = x.numel() / c;
    BasicTensor<T> y(x.shape());
    const T e = static_cast<T>(eps);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* in = x.data().data() + r * c;
        T* out = y.data().data() + r * c;
        T mean = 0;
        for (std::size_t j = 0; j < c; ++j) mean += in[j];
        mean /= static_cast<T>(c);
        T var = 0;
        for (std::size_t j = 0; j < c; ++j) var += (in[j] - mean) * (in[j] - mean);
        var /= static_cast<T>(c);
        const T rstd = T(1) / std::sqrt(var + e);
        for (std::size_t j = 0; j < c; ++j) out[j] = (in[j] - mean) * rstd * gamma[j] + beta[j];
    }
    return y;
}

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>* bias) {
    require_rank(x.shape(), 2, "linear");
    require_rank(w.shape(), 2, "linear");
    if (x.cols() != w.rows()) {
        throw DimensionError("linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
    }
    BasicTensor<T> y = matmul(x, w);
    if (bias) {
        if (bias->numel() != w.cols()) {
            throw DimensionError("linear: bias " + shape_str(bias->shape()) + " vs weight " +
                                 shape_str(w.shape()));
        }
        const std::size_t n = y.cols();
        for (std::size_t i = 0; i < y.rows(); ++i)
            for (std::size_t j = 0; j < n; ++j) y.at(i, j) += (*bias)[j];
    }
    return y;
}

template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x) {
    BasicTensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] * normal_cdf(x[i]);
    return y;
}

namespace {

struct ConvGeometry {
    std::size_t c, h, w, kh, kw, ph, pw;
};

template <typename T>
ConvGeometry conv_geometry(const BasicTensor<T>& x, const BasicTensor<T>& k) {
    require_rank(x.shape(), 3, "depthwise_conv2d");
    require_rank(k.shape(), 3, "depthwise_conv2d");
    if (x.dim(0) != k.dim(0)) {
        throw DimensionError("depthwise_conv2d: input " + shape_str(x.shape()) + " vs kernel " +
                             shape_str(k.shape()));
    }
    if (k.dim(1) % 2 == 0 || k.dim(2) % 2 == 0) {
        throw ConfigError("depthwise_conv2d: kernel extents must be odd, got " + shape_str(k.shape()));
    }
    return {x.dim(0), x.dim(1), x.dim(2), k.dim(1), k.dim(2), (k.dim(1) - 1) / 2, (k.dim(2) - 1) / 2};
}

} // namespace

template <typename T>
BasicTensor<T> depthwise_conv2d(const BasicTensor<T>& x, const BasicTensor<T>& k) {
    const auto g = conv_geometry(x, k);
    BasicTensor<T> y(x.shape());
    for (std::size_t ch = 0; ch < g.c; ++ch) {
        const T* in = x.data().data() + ch * g.h * g.w;
        const T* ker = k.data().data() + ch * g.kh * g.kw;
        T* out = y.data().data() + ch * g.h * g.w;
        for (std::size_t oy = 0; oy < g.h; ++oy) {
            for (std::size_t ox = 0; ox < g.w; ++ox) {
                T acc = 0;
                for (std::size_t dy = 0; dy < g.kh; ++dy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + dy) - static_cast<std::ptrdiff_t>(g.ph);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    for (std::size_t dx = 0; dx < g.kw; ++dx) {
                        const std::ptrdiff_t ix =
                            static_cast<std::ptrdiff_t>(ox + dx) - static_cast<std::ptrdiff_t>(g.pw);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
                        acc += in[iy * g.w + ix] * ker[dy * g.kw + dx];
                    }
                }
                out[oy * g.w + ox] = acc;
            }
        }
    }
    return y;
}

namespace kernels {

template <typename T>
void matmul_backward(const BasicTensor<T>& a, const BasicTensor<T>& b, const BasicTensor<T>& g,
                     BasicTensor<T>* ga, BasicTensor<T>* gb) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (ga) {
        // ga[i][t] += sum_j g[i][j] * b[t][j]
        for (std::size_t i = 0; i < m; ++i) {
            const T* grow = g.data().data() + i * n;
            for (std::size_t t = 0; t < k; ++t) {
                const T* brow = b.data().data() + t * n;
                T acc = 0;
                for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                ga->at(i, t) += acc;
            }
        }
    }
    if (gb) {
        // gb[t][j] += sum_i a[i][t] * g[i][j]
        for (std::size_t i = 0; i < m; ++i) {
            const T* grow = g.data().data() + i * n;
            for (std::size_t t = 0; t < k; ++t) {
                const T av = a.at(i, t);
                T* gbrow = gb->data().data() + t * n;
                for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
            }
        }
    }
}

template <typename T>
void softmax_rows_backward(const BasicTensor<T>& y, const BasicTensor<T>& g, BasicTensor<T>& gx) {
    const std::size_t m = y.rows(), n = y.cols();
    for (std::size_t i = 0; i < m; ++i) {
        T dot = 0;
        for (std::size_t j = 0; j < n; ++j) dot += g.at(i, j) * y.at(i, j);
        for (std::size_t j = 0; j < n; ++j) gx.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
    }
}

template <typename T>
void layer_norm_backward(const BasicTensor<T>& x, const BasicTensor<T>& gamma, double eps,
                         const BasicTensor<T>& g, BasicTensor<T>* gx, BasicTensor<T>* ggamma,
                         BasicTensor<T>* gbeta) {
    const std::size_t c = x.shape().back();
    const std::size_t rows = x.numel() / c;
    const T e = static_cast<T>(eps);
    const T inv_c = T(1) / static_cast<T>(c);
    std::vector<T> xhat(c), dxhat(c);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* in = x.data().data() + r * c;
        const T* gr = g.data().data() + r * c;
        T mean = 0;
        for (std::size_t j = 0; j < c; ++j) mean += in[j];
        mean *= inv_c;
        T var = 0;
        for (std::size_t j = 0; j < c; ++j) var += (in[j] - mean) * (in[j] - mean);
        var *= inv_c;
        const T rstd = T(1) / std::sqrt(var + e);
        T sum_d = 0, sum_dx = 0;
        for (std::size_t j = 0; j < c; ++j) {
            xhat[j] = (in[j] - mean) * rstd;
            dxhat[j] = gr[j] * gamma[j];
            sum_d += dxhat[j];
            sum_dx += dxhat[j] * xhat[j];
        }
        if (ggamma)
            for (std::size_t j = 0; j < c; ++j) (*ggamma)[j] += gr[j] * xhat[j];
        if (gbeta)
            for (std::size_t j = 0; j < c; ++j) (*gbeta)[j] += gr[j];
        if (gx) {
            T* out = gx->data().data() + r * c;
            for (std::size_t j = 0; j < c; ++j)
                out[j] += rstd * (dxhat[j] - sum_d * inv_c - xhat[j] * sum_dx * inv_c);
        }
    }
}

template <typename T>
void gelu_backward(const BasicTensor<T>& x, const BasicTensor<T>& g, BasicTensor<T>& gx) {
    for (std::size_t i = 0; i < x.numel(); ++i)
        gx[i] += g[i] * (normal_cdf(x[i]) + x[i] * normal_pdf(x[i]));
}

template <typename T>
void depthwise_conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& k, const BasicTensor<T>& g,
                               BasicTensor<T>* gx, BasicTensor<T>* gk) {
    const auto geo = conv_geometry(x, k);
    for (std::size_t ch = 0; ch < geo.c; ++ch) {
        const std::size_t xoff = ch * geo.h * geo.w;
        const std::size_t koff = ch * geo.kh * geo.kw;
        for (std::size_t oy = 0; oy < geo.h; ++oy) {
            for (std::size_t ox = 0; ox < geo.w; ++ox) {
                const T go = g[xoff + oy * geo.w + ox];
                for (std::size_t dy = 0; dy < geo.kh; ++dy) {
                    const std::ptrdiff_t iy =
                        static_cast<std::ptrdiff_t>(oy + dy) - static_cast<std::ptrdiff_t>(geo.ph);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(geo.h)) continue;
                    for (std::size_t dx = 0; dx < geo.kw; ++dx) {
                        const std::ptrdiff_t ix =
                            static_cast<std::ptrdiff_t>(ox + dx) - static_cast<std::ptrdiff_t>(geo.pw);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(geo.w)) continue;
                        const std::size_t xi = xoff + static_cast<std::size_t>(iy) * geo.w + ix;
                        const std::size_t ki = koff + dy * geo.kw + dx;
                        if (gx) (*gx)[xi] += go * k[ki];
                        if (gk) (*gk)[ki] += go * x[xi];
                    }
                }
            }
        }
    }
}

} // namespace kernels

#define GGT_INSTANTIATE_OPS(T)                                                                         \
    template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                     \
    template BasicTensor<T> transpose(const BasicTensor<T>&);                                         \
    template BasicTensor<T> softmax_rows(const BasicTensor<T>&);                                      \
    template BasicTensor<T> layer_norm(const BasicTensor<T>&, const BasicTensor<T>&,                  \
                                       const BasicTensor<T>&, double);                                \
    template BasicTensor<T> linear(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>*); \
    template BasicTensor<T> gelu(const BasicTensor<T>&);                                              \
    template BasicTensor<T> depthwise_conv2d(const BasicTensor<T>&, const BasicTensor<T>&);           \
    template void kernels::matmul_backward(const BasicTensor<T>&, const BasicTensor<T>&,              \
                                           const BasicTensor<T>&, BasicTensor<T>*, BasicTensor<T>*);  \
    template void kernels::softmax_rows_backward(const BasicTensor<T>&, const BasicTensor<T>&,        \
                                                 BasicTensor<T>&);                                    \
    template void kernels::layer_norm_backward(const BasicTensor<T>&, const BasicTensor<T>&, double,  \
                                               const BasicTensor<T>&, BasicTensor<T>*,                \
                                               BasicTensor<T>*, BasicTensor<T>*);                     \
    template void kernels::gelu_backward(const BasicTensor<T>&, const BasicTensor<T>&, BasicTensor<T>&); \
    template void kernels::depthwise_conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&,    \
                                                     const BasicTensor<T>&, BasicTensor<T>*,          \
                                                     BasicTensor<T>*);

GGT_INSTANTIATE_OPS(double)
GGT_INSTANTIATE_OPS(float)

} // namespace ggt
