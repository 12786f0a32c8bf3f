#ifndef HEBBNET_NETWORK_HPP
#define HEBBNET_NETWORK_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "hebbnet/activations.hpp"
#include "hebbnet/plasticity.hpp"
#include "hebbnet/tensor.hpp"

namespace hebbnet {

enum class PoolType { none, max, avg };

// One BN -> SoftHebb conv -> pool -> activation stage.
struct LayerSpec {
    int in_channels = 0;
    int out_channels = 0;   // width
    int conv_kernel = 0;
    int conv_padding = 0;   // (k-1)/2 for same-size convolution
    PoolType pool_type = PoolType::max;
    int pool_kernel = 4;
    int pool_stride = 2;
    int pool_padding = 1;
    ActivationSpec activation;
    PlasticityConfig plasticity;
    InitSpec init;
};

struct ArchitectureSpec {
    int input_res = 0;
    int input_channels = 0;
    int first_width = 0;
    int width_factor = 1;
    bool fully_connected = false;
    std::vector<LayerSpec> layers;
};

// Per-layer hyperparameter overrides for build_architecture; fields < 0 /
// empty mean "use the shipped per-depth default".
struct LayerOverrides {
    float base_lr = -1.0f;
    float lr_power = -1.0f;
    float inv_temp = -1.0f;
    int conv_kernel = -1;
    int pool_kernel = -1;
    int pool_type = -1;  // 0 max, 1 avg
    float activation_power = -1.0f;
};

// Width-scaled stack: widths follow #F_l = f_w * #F_{l-1}; layers are added
// while the running (halving) resolution stays above 6.
ArchitectureSpec build_architecture(int input_res, int input_channels,
                                    int first_width, int width_factor,
                                    const std::vector<LayerOverrides>& overrides = {});

// Single hidden fully connected layer: conv kernel = full input resolution.
ArchitectureSpec build_fully_connected(int input_res, int input_channels, int width);

int pool_output_dim(int in, int kernel, int stride, int padding);

struct Layer {
    LayerSpec spec;
    NeuronBank bank;
    BatchNormState bn;
};

struct Model {
    ArchitectureSpec arch;
    std::uint64_t seed = 0;
    std::vector<Layer> layers;
    // data-normalization stats carried into the checkpoint manifest
    std::vector<float> data_mean, data_std;
};

Model make_model(const ArchitectureSpec& arch, std::uint64_t seed);

// BN -> conv -> pool -> activation, in that order.
Tensor forward_layer(const Tensor& input, Layer& layer, Mode mode);

// Train-mode forward that also exposes what plasticity needs: the post-BN
// patch matrix feeding the convolution.
struct LayerForward {
    Tensor output;
    PatchMatrix patches;  // post-BN, conv geometry
};
LayerForward forward_layer_train(const Tensor& input, Layer& layer);

// forward through layers [0, upto_layer]; layers before `train_layer`
// (if >= 0) run in eval mode, `train_layer` runs in the given mode
Tensor forward(Model& model, const Tensor& input, int upto_layer, Mode mode);

// flattened eval-mode features after the last (or given) layer
std::vector<float> feature_vector(Model& model, const Tensor& single_image, int upto_layer);
long feature_dim(const Model& model, int upto_layer);

}  // namespace hebbnet

#endif
