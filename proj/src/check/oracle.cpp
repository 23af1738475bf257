#include "ggt/oracle.hpp"

#include <cmath>

namespace ggt::oracle {

Mat to_mat(const Tensor& t) {
    const std::size_t rows = t.rank() == 1 ? 1 : t.dim(0);
    const std::size_t cols = t.numel() / rows;
    Mat m(rows, Vec(cols));
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m[i][j] = t[i * cols + j];
    return m;
}

Tensor from_mat(const Mat& m) {
    Tensor t({m.size(), m[0].size()});
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m[0].size(); ++j) t.at(i, j) = m[i][j];
    return t;
}

namespace {

Vec flat(const Tensor& t) { return Vec(t.data().begin(), t.data().end()); }

Mat affine(const Mat& x, const Mat& w, const Vec& b) {
    Mat y(x.size(), Vec(w[0].size(), 0.0));
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < w[0].size(); ++j) {
            double s = b.empty() ? 0.0 : b[j];
            for (std::size_t t = 0; t < w.size(); ++t) s += x[i][t] * w[t][j];
            y[i][j] = s;
        }
    }
    return y;
}

Mat add(const Mat& a, const Mat& b) {
    Mat y = a;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) y[i][j] += b[i][j];
    return y;
}

Mat layer_norm(const Mat& x, const Vec& g, const Vec& b) {
    Mat y = x;
    for (auto& row : y) {
        double mean = 0, var = 0;
        for (double v : row) mean += v;
        mean /= row.size();
        for (double v : row) var += (v - mean) * (v - mean);
        var /= row.size();
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean) / std::sqrt(var + 1e-5) * g[j] + b[j];
    }
    return y;
}

} // namespace

Attn from_weights(const AttentionWeights<double>& w, const AttentionConfig& cfg) {
    Attn a;
    a.wq = to_mat(w.wq.value);
    a.wk = to_mat(w.wk.value);
    a.wv = to_mat(w.wv.value);
    a.wo = to_mat(w.wo.value);
    a.bq = flat(w.bq.value);
    a.bk = flat(w.bk.value);
    a.bv = flat(w.bv.value);
    a.bo = flat(w.bo.value);
    if (cfg.rel_pos_bias && w.has_rel_bias) a.table = to_mat(w.rel_bias.value);
    a.heads = cfg.heads;
    a.m = cfg.m;
    return a;
}

Mat attend(const Mat& x, const Attn& a, const std::vector<std::pair<long, long>>* coords, Vec* row_sums) {
    const Mat q = affine(x, a.wq, a.bq), k = affine(x, a.wk, a.bk), v = affine(x, a.wv, a.bv);
    const std::size_t n = x.size(), c = a.wq[0].size(), d = c / a.heads;
    const long m = static_cast<long>(a.m);
    Mat out(n, Vec(c, 0.0));
    for (std::size_t h = 0; h < a.heads; ++h) {
        for (std::size_t i = 0; i < n; ++i) {
            Vec s(n);
            for (std::size_t j = 0; j < n; ++j) {
                double dot = 0;
                for (std::size_t t = 0; t < d; ++t) dot += q[i][h * d + t] * k[j][h * d + t];
                s[j] = dot / std::sqrt(static_cast<double>(d));
                if (coords && !a.table.empty()) {
                    const long dp = (*coords)[i].first - (*coords)[j].first + m - 1;
                    const long dq = (*coords)[i].second - (*coords)[j].second + m - 1;
                    s[j] += a.table[dp * (2 * m - 1) + dq][h];
                }
            }
            double top = s[0];
            for (double e : s) top = std::max(top, e);
            double z = 0;
            for (double& e : s) z += (e = std::exp(e - top));
            double total = 0;
            for (double& e : s) total += (e /= z);
            if (row_sums) row_sums->push_back(total);
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t t = 0; t < d; ++t) out[i][h * d + t] += s[j] * v[j][h * d + t];
        }
    }
    return out;
}

Mat project(const Mat& x, const Attn& a) { return affine(x, a.wo, a.bo); }

Mat msa(const Mat& x, const Attn& a, Vec* row_sums) {
    Attn plain = a;
    plain.table.clear();
    return project(attend(x, plain, nullptr, row_sums), a);
}

namespace {

// Runs attention on each group of grid coordinates and writes the results back
// to those coordinates.
template <typename Members>
Mat grouped(const Mat& x, const Attn& a, std::size_t h, std::size_t w, std::size_t groups_h, std::size_t groups_w,
            Members members, Vec* row_sums) {
    Mat out(h * w);
    for (std::size_t gi = 0; gi < groups_h; ++gi) {
        for (std::size_t gj = 0; gj < groups_w; ++gj) {
            std::vector<std::pair<long, long>> local;
            std::vector<std::size_t> tokens;
            for (std::size_t p = 0; p < a.m; ++p) {
                for (std::size_t q = 0; q < a.m; ++q) {
                    const auto [row, col] = members(gi, gj, p, q);
                    tokens.push_back(row * w + col);
                    local.emplace_back(p, q);
                }
            }
            Mat sub;
            for (auto t : tokens) sub.push_back(x[t]);
            const Mat y = attend(sub, a, &local, row_sums);
            for (std::size_t t = 0; t < tokens.size(); ++t) out[tokens[t]] = y[t];
        }
    }
    return out;
}

} // namespace

Mat glance(const Mat& x, const Attn& a, std::size_t h, std::size_t w, Vec* row_sums) {
    const std::size_t dh = h / a.m, dw = w / a.m;
    return grouped(x, a, h, w, dh, dw, [&](std::size_t i, std::size_t j, std::size_t p, std::size_t q) {
        return std::pair{i + p * dh, j + q * dw};
    }, row_sums);
}

Mat g_msa(const Mat& x, const Attn& a, std::size_t h, std::size_t w, Vec* row_sums) {
    return project(glance(x, a, h, w, row_sums), a);
}

Mat w_msa(const Mat& x, const Attn& a, std::size_t h, std::size_t w, Vec* row_sums) {
    const std::size_t m = a.m;
    return project(grouped(x, a, h, w, h / m, w / m, [&](std::size_t i, std::size_t j, std::size_t p, std::size_t q) {
        return std::pair{i * m + p, j * m + q};
    }, row_sums), a);
}

Mat sra(const Mat& x, const Attn& a, std::size_t h, std::size_t w, std::size_t r) {
    const std::size_t c = x[0].size();
    Mat pooled;
    for (std::size_t i = 0; i < h / r; ++i) {
        for (std::size_t j = 0; j < w / r; ++j) {
            Vec mean(c, 0.0);
            for (std::size_t di = 0; di < r; ++di)
                for (std::size_t dj = 0; dj < r; ++dj)
                    for (std::size_t t = 0; t < c; ++t) mean[t] += x[(i * r + di) * w + j * r + dj][t];
            for (double& v : mean) v /= static_cast<double>(r * r);
            pooled.push_back(mean);
        }
    }
    const Mat q = affine(x, a.wq, a.bq), k = affine(pooled, a.wk, a.bk), v = affine(pooled, a.wv, a.bv);
    const std::size_t d = c / a.heads;
    Mat out(x.size(), Vec(c, 0.0));
    for (std::size_t hd = 0; hd < a.heads; ++hd) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            Vec s(pooled.size());
            double z = 0;
            for (std::size_t j = 0; j < pooled.size(); ++j) {
                double dot = 0;
                for (std::size_t t = 0; t < d; ++t) dot += q[i][hd * d + t] * k[j][hd * d + t];
                z += (s[j] = std::exp(dot / std::sqrt(static_cast<double>(d))));
            }
            for (std::size_t j = 0; j < pooled.size(); ++j)
                for (std::size_t t = 0; t < d; ++t) out[i][hd * d + t] += s[j] / z * v[j][hd * d + t];
        }
    }
    return project(out, a);
}

Mat conv_tokens(const Mat& x, const Vec& kernel, std::size_t kh, std::size_t kw, std::size_t h, std::size_t w) {
    const std::size_t c = x[0].size();
    const long ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);
    Mat out(h * w, Vec(c, 0.0));
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (long i = 0; i < static_cast<long>(h); ++i) {
            for (long j = 0; j < static_cast<long>(w); ++j) {
                double s = 0;
                for (long u = 0; u < static_cast<long>(kh); ++u) {
                    for (long v = 0; v < static_cast<long>(kw); ++v) {
                        const long r = i + u - ph, col = j + v - pw;
                        if (r < 0 || col < 0 || r >= static_cast<long>(h) || col >= static_cast<long>(w)) continue;
                        s += kernel[(ch * kh + u) * kw + v] * x[r * w + col][ch];
                    }
                }
                out[i * w + j][ch] = s;
            }
        }
    }
    return out;
}

Mat gg_msa(const Mat& x, const BlockWeights<double>& bw, const BlockConfig& cfg) {
    const Attn a = from_weights(bw.attn, cfg.attention());
    const std::size_t h = cfg.spec.h(), w = cfg.spec.w();
    const auto [kh, kw] = cfg.gaze.kernel(cfg.spec);
    const Mat values = affine(x, a.wv, a.bv);
    const Mat local = conv_tokens(values, flat(bw.gaze_kernel.value), kh, kw, h, w);
    return project(add(glance(x, a, h, w), local), a);
}

Mat gg_block(const Mat& x, const BlockWeights<double>& bw, const BlockConfig& cfg) {
    const Mat z = add(gg_msa(layer_norm(x, flat(bw.norm1_gamma.value), flat(bw.norm1_beta.value)), bw, cfg), x);
    Mat hidden = affine(layer_norm(z, flat(bw.norm2_gamma.value), flat(bw.norm2_beta.value)), to_mat(bw.fc1_w.value),
                        flat(bw.fc1_b.value));
    for (auto& row : hidden)
        for (double& v : row) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
    return add(affine(hidden, to_mat(bw.fc2_w.value), flat(bw.fc2_b.value)), z);
}

} // namespace ggt::oracle
