#include "hebbnet/activations.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "hebbnet/plasticity.hpp"

namespace hebbnet {

float repu(float u, float power) {
    if (u <= 0.0f) return 0.0f;
    if (power == 1.0f) return u;
    return std::pow(u, power);
}

Tensor apply_repu(const Tensor& input, float power) {
    if (!(power > 0.0f)) throw std::invalid_argument("repu: power must be positive");
    Tensor out(input.n, input.c, input.h, input.w);
    for (std::size_t i = 0; i < input.v.size(); ++i) out.v[i] = repu(input.v[i], power);
    return out;
}

Tensor apply_triangle(const Tensor& input, float power) {
    if (!(power > 0.0f)) throw std::invalid_argument("triangle: power must be positive");
    if (input.c < 1) throw std::invalid_argument("triangle: needs at least one channel");
    Tensor out(input.n, input.c, input.h, input.w);
    const long plane = static_cast<long>(input.h) * input.w;
    for (int b = 0; b < input.n; ++b) {
        for (long p = 0; p < plane; ++p) {
            double mean = 0.0;
            for (int ch = 0; ch < input.c; ++ch)
                mean += input.v[(static_cast<std::size_t>(b) * input.c + ch) * plane + p];
            mean /= input.c;
            for (int ch = 0; ch < input.c; ++ch) {
                const std::size_t i = (static_cast<std::size_t>(b) * input.c + ch) * plane + p;
                out.v[i] = repu(input.v[i] - static_cast<float>(mean), power);
            }
        }
    }
    return out;
}

Tensor apply_softmax_fwd(const Tensor& input, float inv_temp) {
    Tensor out(input.n, input.c, input.h, input.w);
    const long plane = static_cast<long>(input.h) * input.w;
    std::vector<float> u(input.c), y(input.c);
    for (int b = 0; b < input.n; ++b) {
        for (long p = 0; p < plane; ++p) {
            for (int ch = 0; ch < input.c; ++ch)
                u[ch] = input.v[(static_cast<std::size_t>(b) * input.c + ch) * plane + p];
            soft_competition(u.data(), input.c, inv_temp, y.data());
            for (int ch = 0; ch < input.c; ++ch)
                out.v[(static_cast<std::size_t>(b) * input.c + ch) * plane + p] = y[ch];
        }
    }
    return out;
}

Tensor apply_activation(const Tensor& input, const ActivationSpec& spec) {
    switch (spec.kind) {
        case ActivationSpec::Kind::repu:
            return apply_repu(input, spec.power);
        case ActivationSpec::Kind::triangle:
            return apply_triangle(input, spec.power);
        case ActivationSpec::Kind::softmax_fwd:
            return apply_softmax_fwd(input, spec.fwd_inv_temp);
        case ActivationSpec::Kind::relu:
            return apply_repu(input, 1.0f);
    }
    throw std::logic_error("apply_activation: unknown kind");
}

}  // namespace hebbnet
