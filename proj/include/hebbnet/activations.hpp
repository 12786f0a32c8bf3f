#ifndef HEBBNET_ACTIVATIONS_HPP
#define HEBBNET_ACTIVATIONS_HPP

#include "hebbnet/tensor.hpp"

namespace hebbnet {

struct ActivationSpec {
    enum class Kind { repu, triangle, softmax_fwd, relu };
    Kind kind = Kind::triangle;
    float power = 1.0f;          // p for repu/triangle
    float fwd_inv_temp = 1.0f;   // softmax_fwd only, independent of plasticity temperature
};

// u^p for u > 0, else 0
float repu(float u, float power);

Tensor apply_repu(const Tensor& input, float power);

// per spatial position: RePU(u_j - mean_over_channels, p)
Tensor apply_triangle(const Tensor& input, float power);

// softmax across channels at each spatial position
Tensor apply_softmax_fwd(const Tensor& input, float inv_temp);

Tensor apply_activation(const Tensor& input, const ActivationSpec& spec);

}  // namespace hebbnet

#endif
