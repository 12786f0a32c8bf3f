#ifndef HEBBNET_ANALYSIS_HPP
#define HEBBNET_ANALYSIS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "hebbnet/data.hpp"
#include "hebbnet/network.hpp"

namespace hebbnet {

struct R1Report {
    std::vector<std::vector<float>> radii;  // per layer
    std::vector<float> fraction;            // per layer, |r-1| <= tolerance
    float tolerance = 0.05f;
};

R1Report count_r1(const Model& model, float tolerance = 0.05f);

struct ReceptiveField {
    Tensor image;  // unit L2 norm
    int layer = 0, neuron = 0;
    float activation = 0.0f;
    int iterations = 0;
    bool converged = false;
};

struct PgdOptions {
    int steps = 256;
    float step_size = 0.05f;
    std::uint64_t seed = 0;
    float convergence_delta = 1e-5f;  // declared converged when improvement
    int convergence_window = 10;      // stays below delta this many steps
};

// Activation maximization of the neuron's linear response at the center of
// its feature map, with projection to the unit sphere after each step.
// Activations are bypassed; BN (eval, affine) and pooling are traversed.
ReceptiveField receptive_field_pgd(Model& model, int layer, int neuron,
                                   const PgdOptions& opts = {});

// Gradient of the same linear response w.r.t. the input (analytic); used by
// the PGD loop and checkable against finite differences.
Tensor linear_response_grad(Model& model, const Tensor& image, int layer, int neuron,
                            float* response_out = nullptr);
float linear_response(Model& model, const Tensor& image, int layer, int neuron);

struct PatchHit {
    int image_index = 0;
    int y0 = 0, x0 = 0, y1 = 0, x1 = 0;  // inclusive input-space bounding box
    float activation = 0.0f;
};

std::vector<PatchHit> top_activating_patches(Model& model, const Dataset& ds, int layer,
                                             int neuron, int k);

// Cumulative receptive-field geometry of layer `layer`'s convolution output.
struct RfGeometry {
    int size = 1;       // receptive field extent in input pixels
    int jump = 1;       // input-pixel stride between adjacent features
    float start = 0.f;  // input-space center of feature (0,0)
};
RfGeometry receptive_field_geometry(const Model& model, int layer);

// Binary PPM (P6) tiling images row-major with 1-px separators; per-image
// min-max contrast normalization.
void export_image_grid(const std::vector<Tensor>& images, int grid_cols,
                       const std::string& path);

}  // namespace hebbnet

#endif
