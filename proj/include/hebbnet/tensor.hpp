#ifndef HEBBNET_TENSOR_HPP
#define HEBBNET_TENSOR_HPP

#include <cstddef>
#include <vector>

namespace hebbnet {

// Dense 4-D array in row-major (n, c, h, w) order, single precision.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_),
          v(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0f) {}

    std::size_t size() const { return v.size(); }

    std::size_t index(int in, int ic, int iy, int ix) const {
        return ((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix;
    }
    float& at(int in, int ic, int iy, int ix) { return v[index(in, ic, iy, ix)]; }
    float at(int in, int ic, int iy, int ix) const { return v[index(in, ic, iy, ix)]; }

    // pointer to the start of one image (all channels)
    float* image(int in) { return v.data() + static_cast<std::size_t>(in) * c * h * w; }
    const float* image(int in) const { return v.data() + static_cast<std::size_t>(in) * c * h * w; }

    bool all_finite() const;
};

// im2col result: one row per spatial output position per batch item,
// D = c*k*k columns. Rows are raster order per batch item, batch-major.
struct PatchMatrix {
    long rows = 0;
    int cols = 0;    // D = c*k*k
    int out_h = 0, out_w = 0;
    int batch = 0;
    std::vector<float> m;

    float* row(long r) { return m.data() + static_cast<std::size_t>(r) * cols; }
    const float* row(long r) const { return m.data() + static_cast<std::size_t>(r) * cols; }

    // origin map: which (batch item, y, x) generated row r
    void origin(long r, int& b, int& y, int& x) const {
        const long per = static_cast<long>(out_h) * out_w;
        b = static_cast<int>(r / per);
        const long p = r % per;
        y = static_cast<int>(p / out_w);
        x = static_cast<int>(p % out_w);
    }
};

PatchMatrix extract_patches(const Tensor& input, int kernel, int stride, int padding);

enum class PoolKind { max, avg };

Tensor pool(const Tensor& input, PoolKind kind, int kernel, int stride, int padding);

// Per-channel running statistics; gamma/beta are fixed at 1/0 and never trained.
struct BatchNormState {
    std::vector<float> running_mean;
    std::vector<float> running_var;
    float eps = 1e-5f;
    float momentum = 0.1f;
    bool initialized = false;   // true once train-mode stats exist or a checkpoint was loaded

    void reset(int channels) {
        running_mean.assign(channels, 0.0f);
        running_var.assign(channels, 1.0f);
        initialized = false;
    }
};

enum class Mode { train, eval };

Tensor batch_norm(const Tensor& input, BatchNormState& state, Mode mode);

struct NeuronBank;  // defined in neuron_bank.hpp

// stride is fixed at 1; padding = (k-1)/2 keeps spatial size
Tensor conv_forward(const Tensor& input, const NeuronBank& bank, int padding);

// C(MxN) = alpha * op(A) * op(B) + beta * C, row-major.
void sgemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
           const float* a, int lda, const float* b, int ldb, float beta,
           float* c, int ldc);

}  // namespace hebbnet

#endif
