#ifndef HEBBNET_PLASTICITY_HPP
#define HEBBNET_PLASTICITY_HPP

#include <cstdint>
#include <vector>

#include "hebbnet/neuron_bank.hpp"
#include "hebbnet/tensor.hpp"

namespace hebbnet {

enum class PlasticityMode { soft_hebbian, soft_anti_hebbian, hard_wta };
enum class Aggregation { mean, sum };

struct PlasticityConfig {
    float inv_temp = 1.0f;     // 1/tau
    float base_lr = 0.08f;     // eta
    float lr_power = 0.5f;     // q in (0,1]
    PlasticityMode mode = PlasticityMode::soft_anti_hebbian;
    Aggregation aggregation = Aggregation::mean;
    bool sequential = false;   // apply per patch instead of batched
};

enum class InitFamily { normal, positive_uniform, negative_uniform };

struct InitSpec {
    InitFamily family = InitFamily::normal;
    float target_radius = 2.5f;  // R
};

// Random weights sized so the radius estimator sqrt(D)*E|w| equals
// spec.target_radius: normal sigma = R*sqrt(pi/(2D)); uniform range = R*sqrt(2/D).
NeuronBank init_weights(int num_neurons, int in_channels, int kernel,
                        const InitSpec& spec, std::uint64_t seed);
NeuronBank init_weights_flat(int num_neurons, int synapses, const InitSpec& spec,
                             std::uint64_t seed);

// y_k = exp(u_k/tau) / sum_l exp(u_l/tau), max-subtracted for stability
void soft_competition(const float* u, int k_neurons, float inv_temp, float* y);

// one-hot at argmax, ties to lowest index; returns winner index
int hard_competition(const float* u, int k_neurons, float* y);

// delta_i = lr * y * (x_i - u * w_i)
void softhebb_delta(const float* x, int synapses, float u, float y,
                    const float* w, float lr, float* delta);

// winner keeps its delta, every other neuron gets the negated delta
void anti_hebbian_deltas(const float* x, const float* u, const float* y,
                         const NeuronBank& bank, const float* lrs,
                         std::vector<float>& deltas);

// eta_i = eta * |r_i - 1|^q
float adaptive_lr(float radius, float base_lr, float power);

struct UpdateSummary {
    float mean_abs_delta = 0.0f;
    float mean_radius = 0.0f;
};

// One plasticity step over a mini-batch of patches. Per-neuron learning
// rates come from the radii cached at batch start; lr_override >= 0
// replaces them with a uniform rate (linear-decay scheduler support).
UpdateSummary apply_batch_update(NeuronBank& bank, const PatchMatrix& patches,
                                 const PlasticityConfig& cfg,
                                 float lr_override = -1.0f);

}  // namespace hebbnet

#endif
