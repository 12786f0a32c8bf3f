#include "hebbnet/network.hpp"

#include <sstream>
#include <stdexcept>

namespace hebbnet {

int pool_output_dim(int in, int kernel, int stride, int padding) {
    return (in + 2 * padding - kernel) / stride + 1;
}

namespace {

// Shipped per-depth defaults (CIFAR-10 optima; depth >= 3 reuses layer 3).
LayerSpec depth_default(int depth) {
    LayerSpec s;
    if (depth == 0) {
        s.conv_kernel = 5;
        s.plasticity.base_lr = 0.08f;
        s.plasticity.inv_temp = 1.0f;
        s.pool_type = PoolType::max;
        s.pool_kernel = 4;
        s.activation.power = 0.7f;
    } else if (depth == 1) {
        s.conv_kernel = 3;
        s.plasticity.base_lr = 0.005f;
        s.plasticity.inv_temp = 0.65f;
        s.pool_type = PoolType::max;
        s.pool_kernel = 4;
        s.activation.power = 1.4f;
    } else {
        s.conv_kernel = 3;
        s.plasticity.base_lr = 0.01f;
        s.plasticity.inv_temp = 0.25f;
        s.pool_type = PoolType::avg;
        s.pool_kernel = 2;
        s.activation.power = 1.0f;
    }
    s.plasticity.lr_power = 0.5f;
    s.activation.kind = ActivationSpec::Kind::triangle;
    return s;
}

int pool_padding_for_kernel(int kernel) {
    // kernel 4 -> 1, kernel 3 -> 1, kernel 2 -> 0: keeps exact halving
    return kernel >= 3 ? 1 : 0;
}

void apply_overrides(LayerSpec& s, const LayerOverrides& o) {
    if (o.base_lr >= 0.0f) s.plasticity.base_lr = o.base_lr;
    if (o.lr_power >= 0.0f) s.plasticity.lr_power = o.lr_power;
    if (o.inv_temp >= 0.0f) s.plasticity.inv_temp = o.inv_temp;
    if (o.conv_kernel >= 0) s.conv_kernel = o.conv_kernel;
    if (o.pool_kernel >= 0) s.pool_kernel = o.pool_kernel;
    if (o.pool_type == 0) s.pool_type = PoolType::max;
    if (o.pool_type == 1) s.pool_type = PoolType::avg;
    if (o.activation_power >= 0.0f) s.activation.power = o.activation_power;
}

}  // namespace

ArchitectureSpec build_architecture(int input_res, int input_channels,
                                    int first_width, int width_factor,
                                    const std::vector<LayerOverrides>& overrides) {
    if (input_res < 8) throw std::invalid_argument("build_architecture: input_res must be >= 8");
    if (first_width < 1 || width_factor < 1)
        throw std::invalid_argument("build_architecture: first_width and width_factor must be >= 1");

    ArchitectureSpec arch;
    arch.input_res = input_res;
    arch.input_channels = input_channels;
    arch.first_width = first_width;
    arch.width_factor = width_factor;

    int res = input_res;
    int channels = input_channels;
    int width = first_width;
    int depth = 0;
    // Layers are added while the running resolution exceeds 6, i.e. until the
    // stack has shrunk the output to at most 4x4 (up to odd-size rounding).
    // Reproduces the reference depths: 28->3, 32->3, 96->4, 160->5 layers.
    while (res > 6) {
        LayerSpec s = depth_default(depth);
        if (depth < static_cast<int>(overrides.size())) apply_overrides(s, overrides[depth]);
        s.in_channels = channels;
        s.out_channels = width;
        s.conv_padding = (s.conv_kernel - 1) / 2;
        s.pool_stride = 2;
        s.pool_padding = pool_padding_for_kernel(s.pool_kernel);
        const int out = pool_output_dim(res, s.pool_kernel, s.pool_stride, s.pool_padding);
        if (out < 1) throw std::invalid_argument("build_architecture: resolution not reducible");
        arch.layers.push_back(s);
        res = out;
        channels = width;
        width *= width_factor;
        ++depth;
        if (depth > 16)
            throw std::invalid_argument("build_architecture: resolution not reducible to <= 4");
    }
    return arch;
}

ArchitectureSpec build_fully_connected(int input_res, int input_channels, int width) {
    ArchitectureSpec arch;
    arch.input_res = input_res;
    arch.input_channels = input_channels;
    arch.first_width = width;
    arch.width_factor = 1;
    arch.fully_connected = true;

    LayerSpec s = depth_default(0);
    s.in_channels = input_channels;
    s.out_channels = width;
    s.conv_kernel = input_res;
    s.conv_padding = 0;
    s.pool_type = PoolType::none;
    s.activation.kind = ActivationSpec::Kind::triangle;
    s.activation.power = 1.0f;
    arch.layers.push_back(s);
    return arch;
}

Model make_model(const ArchitectureSpec& arch, std::uint64_t seed) {
    Model m;
    m.arch = arch;
    m.seed = seed;
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const LayerSpec& s = arch.layers[i];
        Layer layer;
        layer.spec = s;
        layer.bank = init_weights(s.out_channels, s.in_channels, s.conv_kernel,
                                  s.init, seed + i * 7919);
        layer.bn.reset(s.in_channels);
        m.layers.push_back(std::move(layer));
    }
    return m;
}

Tensor forward_layer(const Tensor& input, Layer& layer, Mode mode) {
    if (input.c != layer.spec.in_channels) {
        std::ostringstream os;
        os << "forward_layer: expected " << layer.spec.in_channels << " channels, got "
           << input.c;
        throw std::invalid_argument(os.str());
    }
    Tensor x = batch_norm(input, layer.bn, mode);
    x = conv_forward(x, layer.bank, layer.spec.conv_padding);
    if (layer.spec.pool_type != PoolType::none)
        x = pool(x, layer.spec.pool_type == PoolType::max ? PoolKind::max : PoolKind::avg,
                 layer.spec.pool_kernel, layer.spec.pool_stride, layer.spec.pool_padding);
    return apply_activation(x, layer.spec.activation);
}

LayerForward forward_layer_train(const Tensor& input, Layer& layer) {
    if (input.c != layer.spec.in_channels)
        throw std::invalid_argument("forward_layer_train: channel mismatch");
    LayerForward f;
    Tensor x = batch_norm(input, layer.bn, Mode::train);
    f.patches = extract_patches(x, layer.spec.conv_kernel, 1, layer.spec.conv_padding);
    x = conv_forward(x, layer.bank, layer.spec.conv_padding);
    if (layer.spec.pool_type != PoolType::none)
        x = pool(x, layer.spec.pool_type == PoolType::max ? PoolKind::max : PoolKind::avg,
                 layer.spec.pool_kernel, layer.spec.pool_stride, layer.spec.pool_padding);
    f.output = apply_activation(x, layer.spec.activation);
    return f;
}

Tensor forward(Model& model, const Tensor& input, int upto_layer, Mode mode) {
    if (upto_layer < 0 || upto_layer >= static_cast<int>(model.layers.size()))
        throw std::invalid_argument("forward: layer index out of range");
    Tensor x = input;
    for (int i = 0; i <= upto_layer; ++i) x = forward_layer(x, model.layers[i], mode);
    return x;
}

long feature_dim(const Model& model, int upto_layer) {
    int res = model.arch.input_res;
    for (int i = 0; i <= upto_layer; ++i) {
        const LayerSpec& s = model.arch.layers[i];
        res = res + 2 * s.conv_padding - s.conv_kernel + 1;  // stride-1 conv
        if (s.pool_type != PoolType::none)
            res = pool_output_dim(res, s.pool_kernel, s.pool_stride, s.pool_padding);
    }
    return static_cast<long>(model.arch.layers[upto_layer].out_channels) * res * res;
}

std::vector<float> feature_vector(Model& model, const Tensor& single_image, int upto_layer) {
    Tensor out = forward(model, single_image, upto_layer, Mode::eval);
    return out.v;
}

}  // namespace hebbnet
