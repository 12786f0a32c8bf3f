#ifndef HEBBNET_NEURON_BANK_HPP
#define HEBBNET_NEURON_BANK_HPP

#include <cstddef>
#include <vector>

namespace hebbnet {

// Per-layer weight matrix K x D with cached per-neuron Euclidean radii.
// Kernel geometry: D = in_channels * kernel * kernel.
struct NeuronBank {
    int num_neurons = 0;     // K
    int synapses = 0;        // D
    int in_channels = 0;
    int kernel = 0;

    std::vector<float> weights;  // row-major K x D
    std::vector<float> radii;    // K cached row norms

    NeuronBank() = default;
    NeuronBank(int k_neurons, int in_ch, int kern)
        : num_neurons(k_neurons), synapses(in_ch * kern * kern),
          in_channels(in_ch), kernel(kern),
          weights(static_cast<std::size_t>(k_neurons) * in_ch * kern * kern, 0.0f),
          radii(k_neurons, 0.0f) {}

    float* row(int k) { return weights.data() + static_cast<std::size_t>(k) * synapses; }
    const float* row(int k) const { return weights.data() + static_cast<std::size_t>(k) * synapses; }

    void recompute_radii();
    float mean_radius() const;
    bool all_finite() const;
};

}  // namespace hebbnet

#endif
