#include "hebbnet/tensor.hpp"

#include <cblas.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "hebbnet/neuron_bank.hpp"

namespace hebbnet {

bool Tensor::all_finite() const {
    for (float x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

void sgemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
           const float* a, int lda, const float* b, int ldb, float beta,
           float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
                ldb, beta, c, ldc);
}

PatchMatrix extract_patches(const Tensor& input, int kernel, int stride, int padding) {
    if (kernel < 1 || stride < 1 || padding < 0)
        throw std::invalid_argument("extract_patches: kernel/stride must be >= 1, padding >= 0");
    const int padded_h = input.h + 2 * padding;
    const int padded_w = input.w + 2 * padding;
    if (padded_h < kernel || padded_w < kernel) {
        std::ostringstream os;
        os << "extract_patches: padded input " << padded_h << "x" << padded_w
           << " smaller than kernel " << kernel;
        throw std::invalid_argument(os.str());
    }

    PatchMatrix p;
    p.batch = input.n;
    p.cols = input.c * kernel * kernel;
    p.out_h = (padded_h - kernel) / stride + 1;
    p.out_w = (padded_w - kernel) / stride + 1;
    p.rows = static_cast<long>(input.n) * p.out_h * p.out_w;
    p.m.assign(static_cast<std::size_t>(p.rows) * p.cols, 0.0f);

    for (int b = 0; b < input.n; ++b) {
        long r = static_cast<long>(b) * p.out_h * p.out_w;
        for (int oy = 0; oy < p.out_h; ++oy) {
            for (int ox = 0; ox < p.out_w; ++ox, ++r) {
                float* dst = p.row(r);
                const int y0 = oy * stride - padding;
                const int x0 = ox * stride - padding;
                for (int ch = 0; ch < input.c; ++ch) {
                    for (int ky = 0; ky < kernel; ++ky) {
                        const int y = y0 + ky;
                        for (int kx = 0; kx < kernel; ++kx) {
                            const int x = x0 + kx;
                            const std::size_t d =
                                (static_cast<std::size_t>(ch) * kernel + ky) * kernel + kx;
                            if (y >= 0 && y < input.h && x >= 0 && x < input.w)
                                dst[d] = input.at(b, ch, y, x);
                            // padding cells stay zero
                        }
                    }
                }
            }
        }
    }
    return p;
}

Tensor conv_forward(const Tensor& input, const NeuronBank& bank, int padding) {
    if (bank.in_channels != input.c) {
        std::ostringstream os;
        os << "conv_forward: bank expects " << bank.in_channels
           << " input channels, got " << input.c;
        throw std::invalid_argument(os.str());
    }
    if (padding == (bank.kernel - 1) / 2 && bank.kernel % 2 == 0)
        throw std::invalid_argument("conv_forward: even kernel has no center for same-padding");

    PatchMatrix p = extract_patches(input, bank.kernel, /*stride=*/1, padding);
    // U = P * W^T, rows x K
    std::vector<float> u(static_cast<std::size_t>(p.rows) * bank.num_neurons);
    sgemm(false, true, static_cast<int>(p.rows), bank.num_neurons, p.cols, 1.0f,
          p.m.data(), p.cols, bank.weights.data(), bank.synapses, 0.0f, u.data(),
          bank.num_neurons);

    Tensor out(input.n, bank.num_neurons, p.out_h, p.out_w);
    const long per = static_cast<long>(p.out_h) * p.out_w;
    for (int b = 0; b < input.n; ++b) {
        for (long pos = 0; pos < per; ++pos) {
            const float* src = u.data() + (b * per + pos) * bank.num_neurons;
            for (int k = 0; k < bank.num_neurons; ++k)
                out.v[(static_cast<std::size_t>(b) * bank.num_neurons + k) * per + pos] = src[k];
        }
    }
    return out;
}

Tensor pool(const Tensor& input, PoolKind kind, int kernel, int stride, int padding) {
    if (kernel < 1 || stride < 1 || padding < 0)
        throw std::invalid_argument("pool: bad kernel/stride/padding");
    if (padding >= kernel)
        throw std::invalid_argument("pool: window entirely inside padding");
    const int out_h = (input.h + 2 * padding - kernel) / stride + 1;
    const int out_w = (input.w + 2 * padding - kernel) / stride + 1;
    if (out_h < 1 || out_w < 1)
        throw std::invalid_argument("pool: output would be empty");

    Tensor out(input.n, input.c, out_h, out_w);
    for (int b = 0; b < input.n; ++b) {
        for (int ch = 0; ch < input.c; ++ch) {
            for (int oy = 0; oy < out_h; ++oy) {
                for (int ox = 0; ox < out_w; ++ox) {
                    const int y0 = oy * stride - padding;
                    const int x0 = ox * stride - padding;
                    float acc = (kind == PoolKind::max)
                                    ? -std::numeric_limits<float>::infinity()
                                    : 0.0f;
                    int count = 0;
                    for (int ky = 0; ky < kernel; ++ky) {
                        const int y = y0 + ky;
                        if (y < 0 || y >= input.h) continue;
                        for (int kx = 0; kx < kernel; ++kx) {
                            const int x = x0 + kx;
                            if (x < 0 || x >= input.w) continue;
                            const float val = input.at(b, ch, y, x);
                            if (kind == PoolKind::max)
                                acc = std::max(acc, val);
                            else
                                acc += val;
                            ++count;
                        }
                    }
                    if (count == 0)
                        throw std::invalid_argument("pool: window entirely inside padding");
                    out.at(b, ch, oy, ox) =
                        (kind == PoolKind::max) ? acc : acc / static_cast<float>(count);
                }
            }
        }
    }
    return out;
}

Tensor batch_norm(const Tensor& input, BatchNormState& state, Mode mode) {
    if (static_cast<int>(state.running_mean.size()) != input.c)
        state.reset(input.c);
    const long per_channel = static_cast<long>(input.n) * input.h * input.w;

    std::vector<float> mean(input.c), var(input.c);
    if (mode == Mode::train) {
        if (per_channel < 2)
            throw std::invalid_argument("batch_norm: train mode needs n*h*w >= 2 per channel");
        for (int ch = 0; ch < input.c; ++ch) {
            double s = 0.0;
            for (int b = 0; b < input.n; ++b)
                for (int y = 0; y < input.h; ++y)
                    for (int x = 0; x < input.w; ++x) s += input.at(b, ch, y, x);
            const double mu = s / per_channel;
            double sq = 0.0;
            for (int b = 0; b < input.n; ++b)
                for (int y = 0; y < input.h; ++y)
                    for (int x = 0; x < input.w; ++x) {
                        const double d = input.at(b, ch, y, x) - mu;
                        sq += d * d;
                    }
            mean[ch] = static_cast<float>(mu);
            var[ch] = static_cast<float>(sq / per_channel);  // biased, used for normalization
            state.running_mean[ch] = (1.0f - state.momentum) * state.running_mean[ch] +
                                     state.momentum * mean[ch];
            state.running_var[ch] = (1.0f - state.momentum) * state.running_var[ch] +
                                    state.momentum * var[ch];
        }
        state.initialized = true;
    } else {
        if (!state.initialized)
            throw std::runtime_error(
                "batch_norm: eval mode before any train-mode statistics or checkpoint load");
        mean = state.running_mean;
        var = state.running_var;
    }

    Tensor out(input.n, input.c, input.h, input.w);
    for (int ch = 0; ch < input.c; ++ch) {
        const float inv = 1.0f / std::sqrt(var[ch] + state.eps);
        const float mu = mean[ch];
        for (int b = 0; b < input.n; ++b) {
            const std::size_t base = (static_cast<std::size_t>(b) * input.c + ch) *
                                     input.h * input.w;
            for (long i = 0; i < static_cast<long>(input.h) * input.w; ++i)
                out.v[base + i] = (input.v[base + i] - mu) * inv;
        }
    }
    return out;
}

void NeuronBank::recompute_radii() {
    for (int k = 0; k < num_neurons; ++k) {
        const float* w = row(k);
        double s = 0.0;
        for (int d = 0; d < synapses; ++d) s += static_cast<double>(w[d]) * w[d];
        radii[k] = static_cast<float>(std::sqrt(s));
    }
}

float NeuronBank::mean_radius() const {
    if (num_neurons == 0) return 0.0f;
    double s = 0.0;
    for (float r : radii) s += r;
    return static_cast<float>(s / num_neurons);
}

bool NeuronBank::all_finite() const {
    for (float x : weights)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace hebbnet
