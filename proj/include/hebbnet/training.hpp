#ifndef HEBBNET_TRAINING_HPP
#define HEBBNET_TRAINING_HPP

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "hebbnet/data.hpp"
#include "hebbnet/network.hpp"

namespace hebbnet {

// CSV stream: step,layer,mean_radius,r1_fraction,lr,loss,train_acc,val_acc
class MetricsWriter {
public:
    MetricsWriter() = default;  // disabled
    explicit MetricsWriter(const std::string& path);
    void unsupervised_row(long step, int layer, float mean_radius, float r1_fraction,
                          float lr);
    void supervised_row(long step, float lr, float loss, float train_acc, float val_acc);

private:
    std::ofstream out_;
};

enum class UnsupLrScheme { adaptive, linear_decay };

struct UnsupervisedRunConfig {
    int epochs = 1;
    int batch_size = 10;
    long max_iterations = -1;  // per layer; -1 = unlimited
    bool simultaneous = false; // default: sequential greedy, each layer frozen
    std::uint64_t seed = 0;
    UnsupLrScheme lr_scheme = UnsupLrScheme::adaptive;
    float r1_tolerance = 0.05f;
};

// Greedy layer-wise SoftHebb training; frozen layers run in eval mode.
void train_unsupervised(Model& model, const Dataset& train, const UnsupervisedRunConfig& cfg,
                        MetricsWriter* metrics = nullptr);

struct ClassifierHead {
    int num_classes = 0;
    int dim = 0;
    std::vector<float> weights;  // num_classes x dim
    std::vector<float> bias;     // num_classes
    float dropout = 0.5f;
};

ClassifierHead make_head(int num_classes, int dim, float dropout, std::uint64_t seed);

// logits = W x + b; train mode applies inverted dropout to the features.
// Returns per-row class log-probabilities, batch x num_classes.
std::vector<float> classifier_forward(const ClassifierHead& head, const float* features,
                                      int batch, Mode mode, std::mt19937_64* rng);

struct HeadGradients {
    std::vector<float> dw;  // num_classes x dim
    std::vector<float> db;  // num_classes
    float loss = 0.0f;      // mean cross-entropy
};

// Analytic gradient of mean cross-entropy: dW = (softmax - onehot)^T x / B.
HeadGradients classifier_backward(const ClassifierHead& head, const float* features,
                                  const int* labels, int batch);

// initial_lr * 2^-m with m = milestones passed at [.20,.35,.50,.60,.70,.80,.90]
float lr_schedule(float progress, float initial_lr);

enum class Optimizer { adam, sgd_momentum };

struct SupervisedRunConfig {
    int epochs = 50;
    int batch_size = 64;
    float initial_lr = 0.001f;
    float dropout = 0.5f;
    Optimizer optimizer = Optimizer::adam;
    float momentum = 0.9f;        // sgd_momentum only
    float validation_fraction = 0.2f;
    std::uint64_t seed = 0;
};

struct FeatureMatrix {
    long n = 0;
    int dim = 0;
    std::vector<float> x;  // n x dim
    const float* row(long i) const { return x.data() + static_cast<std::size_t>(i) * dim; }
};

// eval-mode forward of the whole dataset through layers [0, upto_layer]
FeatureMatrix extract_features(Model& model, const Dataset& ds, int upto_layer,
                               int forward_batch = 64);

struct SupervisedResult {
    ClassifierHead head;
    float final_train_acc = 0.0f;
    float final_val_acc = 0.0f;
};

SupervisedResult train_classifier(const FeatureMatrix& features, const std::vector<int>& labels,
                                  int num_classes, const SupervisedRunConfig& cfg,
                                  MetricsWriter* metrics = nullptr);

struct EvalResult {
    float accuracy = 0.0f;
    std::vector<float> per_class;
};

EvalResult evaluate(const ClassifierHead& head, const FeatureMatrix& features,
                    const std::vector<int>& labels, int num_classes);

}  // namespace hebbnet

#endif
