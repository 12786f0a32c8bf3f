#include "hebbnet/plasticity.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace hebbnet {

namespace {

void fill_random(std::vector<float>& w, int synapses, const InitSpec& spec,
                 std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const float r = spec.target_radius;
    switch (spec.family) {
        case InitFamily::normal: {
            const float sigma = r * std::sqrt(static_cast<float>(M_PI) / (2.0f * synapses));
            std::normal_distribution<float> dist(0.0f, sigma);
            for (auto& x : w) x = dist(rng);
            break;
        }
        case InitFamily::positive_uniform: {
            const float range = r * std::sqrt(2.0f / synapses);
            std::uniform_real_distribution<float> dist(0.0f, range);
            for (auto& x : w) x = dist(rng);
            break;
        }
        case InitFamily::negative_uniform: {
            const float range = r * std::sqrt(2.0f / synapses);
            std::uniform_real_distribution<float> dist(-range, 0.0f);
            for (auto& x : w) x = dist(rng);
            break;
        }
    }
}

}  // namespace

NeuronBank init_weights(int num_neurons, int in_channels, int kernel,
                        const InitSpec& spec, std::uint64_t seed) {
    if (num_neurons < 1 || in_channels < 1 || kernel < 1)
        throw std::invalid_argument("init_weights: K, channels, kernel must be >= 1");
    if (!(spec.target_radius > 0.0f))
        throw std::invalid_argument("init_weights: target radius must be positive");
    NeuronBank bank(num_neurons, in_channels, kernel);
    fill_random(bank.weights, bank.synapses, spec, seed);
    bank.recompute_radii();
    return bank;
}

NeuronBank init_weights_flat(int num_neurons, int synapses, const InitSpec& spec,
                             std::uint64_t seed) {
    if (num_neurons < 1 || synapses < 1)
        throw std::invalid_argument("init_weights: K, D must be >= 1");
    if (!(spec.target_radius > 0.0f))
        throw std::invalid_argument("init_weights: target radius must be positive");
    NeuronBank bank;
    bank.num_neurons = num_neurons;
    bank.synapses = synapses;
    bank.in_channels = synapses;  // 1x1 geometry
    bank.kernel = 1;
    bank.weights.resize(static_cast<std::size_t>(num_neurons) * synapses);
    bank.radii.resize(num_neurons);
    fill_random(bank.weights, synapses, spec, seed);
    bank.recompute_radii();
    return bank;
}

void soft_competition(const float* u, int k_neurons, float inv_temp, float* y) {
    float mx = u[0];
    for (int k = 1; k < k_neurons; ++k) mx = std::max(mx, u[k]);
    float sum = 0.0f;
    for (int k = 0; k < k_neurons; ++k) {
        y[k] = std::exp((u[k] - mx) * inv_temp);
        sum += y[k];
    }
    const float inv = 1.0f / sum;
    for (int k = 0; k < k_neurons; ++k) y[k] *= inv;
}

int hard_competition(const float* u, int k_neurons, float* y) {
    int winner = 0;
    for (int k = 1; k < k_neurons; ++k)
        if (u[k] > u[winner]) winner = k;
    std::fill(y, y + k_neurons, 0.0f);
    y[winner] = 1.0f;
    return winner;
}

void softhebb_delta(const float* x, int synapses, float u, float y,
                    const float* w, float lr, float* delta) {
    const float scale = lr * y;
    for (int d = 0; d < synapses; ++d) delta[d] = scale * (x[d] - u * w[d]);
}

void anti_hebbian_deltas(const float* x, const float* u, const float* y,
                         const NeuronBank& bank, const float* lrs,
                         std::vector<float>& deltas) {
    const int k_neurons = bank.num_neurons;
    const int d = bank.synapses;
    deltas.assign(static_cast<std::size_t>(k_neurons) * d, 0.0f);
    int winner = 0;
    for (int k = 1; k < k_neurons; ++k)
        if (u[k] > u[winner]) winner = k;
    for (int k = 0; k < k_neurons; ++k) {
        softhebb_delta(x, d, u[k], y[k], bank.row(k), lrs[k],
                       deltas.data() + static_cast<std::size_t>(k) * d);
        if (k != winner)
            for (int i = 0; i < d; ++i)
                deltas[static_cast<std::size_t>(k) * d + i] *= -1.0f;
    }
}

float adaptive_lr(float radius, float base_lr, float power) {
    return base_lr * std::pow(std::fabs(radius - 1.0f), power);
}

namespace {

UpdateSummary apply_sequential(NeuronBank& bank, const PatchMatrix& patches,
                               const PlasticityConfig& cfg, float lr_override) {
    const int kn = bank.num_neurons;
    const int d = bank.synapses;
    std::vector<float> u(kn), y(kn), lrs(kn), delta(d);
    double total_abs = 0.0;
    for (long r = 0; r < patches.rows; ++r) {
        const float* x = patches.row(r);
        for (int k = 0; k < kn; ++k) {
            const float* w = bank.row(k);
            double s = 0.0;
            for (int i = 0; i < d; ++i) s += static_cast<double>(w[i]) * x[i];
            u[k] = static_cast<float>(s);
        }
        int winner;
        if (cfg.mode == PlasticityMode::hard_wta)
            winner = hard_competition(u.data(), kn, y.data());
        else {
            soft_competition(u.data(), kn, cfg.inv_temp, y.data());
            winner = 0;
            for (int k = 1; k < kn; ++k)
                if (u[k] > u[winner]) winner = k;
        }
        for (int k = 0; k < kn; ++k)
            lrs[k] = lr_override >= 0.0f
                         ? lr_override
                         : adaptive_lr(bank.radii[k], cfg.base_lr, cfg.lr_power);
        for (int k = 0; k < kn; ++k) {
            softhebb_delta(x, d, u[k], y[k], bank.row(k), lrs[k], delta.data());
            const float sign =
                (cfg.mode == PlasticityMode::soft_anti_hebbian && k != winner) ? -1.0f : 1.0f;
            float* w = bank.row(k);
            for (int i = 0; i < d; ++i) {
                w[i] += sign * delta[i];
                total_abs += std::fabs(delta[i]);
            }
        }
        bank.recompute_radii();
    }
    UpdateSummary s;
    s.mean_abs_delta = patches.rows > 0
                           ? static_cast<float>(total_abs / (patches.rows * kn * d))
                           : 0.0f;
    s.mean_radius = bank.mean_radius();
    return s;
}

}  // namespace

UpdateSummary apply_batch_update(NeuronBank& bank, const PatchMatrix& patches,
                                 const PlasticityConfig& cfg, float lr_override) {
    if (patches.cols != bank.synapses) {
        std::ostringstream os;
        os << "apply_batch_update: patch width " << patches.cols
           << " does not match bank D " << bank.synapses;
        throw std::invalid_argument(os.str());
    }
    if (patches.rows == 0) return {0.0f, bank.mean_radius()};
    if (cfg.sequential) return apply_sequential(bank, patches, cfg, lr_override);

    const int kn = bank.num_neurons;
    const int d = bank.synapses;
    const long rows = patches.rows;

    // U = P * W^T
    std::vector<float> u(static_cast<std::size_t>(rows) * kn);
    sgemm(false, true, static_cast<int>(rows), kn, d, 1.0f, patches.m.data(), d,
          bank.weights.data(), d, 0.0f, u.data(), kn);

    // Signed outputs: y per competition mode; anti-Hebbian flips the sign of
    // every non-winner per patch. The batch delta then collapses to
    //   delta_k = lr_k * ((Y~^T P)_k - (sum_p y~_kp * u_kp) * w_k)
    std::vector<float> ys(static_cast<std::size_t>(rows) * kn);
    std::vector<float> yu(kn, 0.0f);  // per-neuron sum of y~ * u
    std::vector<double> yu_acc(kn, 0.0);
    for (long r = 0; r < rows; ++r) {
        const float* ur = u.data() + static_cast<std::size_t>(r) * kn;
        float* yr = ys.data() + static_cast<std::size_t>(r) * kn;
        int winner = 0;
        if (cfg.mode == PlasticityMode::hard_wta) {
            winner = hard_competition(ur, kn, yr);
        } else {
            soft_competition(ur, kn, cfg.inv_temp, yr);
            for (int k = 1; k < kn; ++k)
                if (ur[k] > ur[winner]) winner = k;
        }
        if (cfg.mode == PlasticityMode::soft_anti_hebbian)
            for (int k = 0; k < kn; ++k)
                if (k != winner) yr[k] = -yr[k];
        for (int k = 0; k < kn; ++k)
            yu_acc[k] += static_cast<double>(yr[k]) * ur[k];
    }
    for (int k = 0; k < kn; ++k) yu[k] = static_cast<float>(yu_acc[k]);

    // A = Y~^T * P  (K x D)
    std::vector<float> a(static_cast<std::size_t>(kn) * d);
    sgemm(true, false, kn, d, static_cast<int>(rows), 1.0f, ys.data(), kn,
          patches.m.data(), d, 0.0f, a.data(), d);

    const float norm =
        cfg.aggregation == Aggregation::mean ? 1.0f / static_cast<float>(rows) : 1.0f;
    double total_abs = 0.0;
    for (int k = 0; k < kn; ++k) {
        const float lr = lr_override >= 0.0f
                             ? lr_override
                             : adaptive_lr(bank.radii[k], cfg.base_lr, cfg.lr_power);
        float* w = bank.row(k);
        const float* ak = a.data() + static_cast<std::size_t>(k) * d;
        for (int i = 0; i < d; ++i) {
            const float delta = lr * norm * (ak[i] - yu[k] * w[i]);
            w[i] += delta;
            total_abs += std::fabs(delta);
        }
    }
    bank.recompute_radii();

    UpdateSummary s;
    s.mean_abs_delta = static_cast<float>(total_abs / (static_cast<double>(kn) * d));
    s.mean_radius = bank.mean_radius();
    return s;
}

}  // namespace hebbnet
