#include "hebbnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hebbnet {

MetricsWriter::MetricsWriter(const std::string& path) : out_(path) {
    if (!out_) throw std::runtime_error("metrics: cannot open " + path);
    out_ << "step,layer,mean_radius,r1_fraction,lr,loss,train_acc,val_acc\n";
}

void MetricsWriter::unsupervised_row(long step, int layer, float mean_radius,
                                     float r1_fraction, float lr) {
    if (!out_.is_open()) return;
    out_ << step << ',' << layer << ',' << mean_radius << ',' << r1_fraction << ',' << lr
         << ",,,\n";
}

void MetricsWriter::supervised_row(long step, float lr, float loss, float train_acc,
                                   float val_acc) {
    if (!out_.is_open()) return;
    out_ << step << ",,,," << lr << ',' << loss << ',' << train_acc << ',' << val_acc << '\n';
}

namespace {

float r1_fraction(const NeuronBank& bank, float tol) {
    int hits = 0;
    for (float r : bank.radii)
        if (std::fabs(r - 1.0f) <= tol) ++hits;
    return bank.num_neurons ? static_cast<float>(hits) / bank.num_neurons : 0.0f;
}

long layer_total_steps(const Dataset& train, const UnsupervisedRunConfig& cfg) {
    const long per_epoch =
        (static_cast<long>(train.images.n) + cfg.batch_size - 1) / cfg.batch_size;
    long total = per_epoch * cfg.epochs;
    if (cfg.max_iterations > 0) total = std::min(total, cfg.max_iterations);
    return total;
}

void train_one_layer(Model& model, int layer_idx, const Dataset& train,
                     const UnsupervisedRunConfig& cfg, MetricsWriter* metrics) {
    Layer& layer = model.layers[layer_idx];
    const long total_steps = layer_total_steps(train, cfg);
    long step = 0;
    BatchIterator it(train, cfg.batch_size, cfg.seed * 977 + layer_idx);
    Tensor batch;
    std::vector<int> labels;
    for (int epoch = 0; epoch < cfg.epochs && step < total_steps; ++epoch) {
        if (epoch > 0) it.reset(cfg.seed * 977 + layer_idx + epoch);
        while (step < total_steps && it.next(batch, labels)) {
            Tensor x = batch;
            for (int i = 0; i < layer_idx; ++i)
                x = forward_layer(x, model.layers[i], Mode::eval);
            Tensor bn_out = batch_norm(x, layer.bn, Mode::train);
            PatchMatrix patches =
                extract_patches(bn_out, layer.spec.conv_kernel, 1, layer.spec.conv_padding);

            float lr_override = -1.0f;
            if (cfg.lr_scheme == UnsupLrScheme::linear_decay)
                lr_override = layer.spec.plasticity.base_lr *
                              (1.0f - static_cast<float>(step) / total_steps);
            apply_batch_update(layer.bank, patches, layer.spec.plasticity, lr_override);
            ++step;

            if (!layer.bank.all_finite()) {
                std::ostringstream os;
                os << "train_unsupervised: non-finite weights in layer " << layer_idx
                   << " at step " << step;
                throw std::runtime_error(os.str());
            }
            if (metrics) {
                const float lr_report =
                    lr_override >= 0.0f
                        ? lr_override
                        : adaptive_lr(layer.bank.mean_radius(),
                                      layer.spec.plasticity.base_lr,
                                      layer.spec.plasticity.lr_power);
                metrics->unsupervised_row(step, layer_idx, layer.bank.mean_radius(),
                                          r1_fraction(layer.bank, cfg.r1_tolerance),
                                          lr_report);
            }
        }
    }
}

void train_simultaneous(Model& model, const Dataset& train, const UnsupervisedRunConfig& cfg,
                        MetricsWriter* metrics) {
    const long total_steps = layer_total_steps(train, cfg);
    long step = 0;
    BatchIterator it(train, cfg.batch_size, cfg.seed * 977);
    Tensor batch;
    std::vector<int> labels;
    for (int epoch = 0; epoch < cfg.epochs && step < total_steps; ++epoch) {
        if (epoch > 0) it.reset(cfg.seed * 977 + epoch);
        while (step < total_steps && it.next(batch, labels)) {
            Tensor x = batch;
            for (std::size_t li = 0; li < model.layers.size(); ++li) {
                Layer& layer = model.layers[li];
                LayerForward f = forward_layer_train(x, layer);
                float lr_override = -1.0f;
                if (cfg.lr_scheme == UnsupLrScheme::linear_decay)
                    lr_override = layer.spec.plasticity.base_lr *
                                  (1.0f - static_cast<float>(step) / total_steps);
                apply_batch_update(layer.bank, f.patches, layer.spec.plasticity, lr_override);
                if (!layer.bank.all_finite())
                    throw std::runtime_error("train_unsupervised: non-finite weights (layer " +
                                             std::to_string(li) + ", step " +
                                             std::to_string(step) + ")");
                if (metrics)
                    metrics->unsupervised_row(step, static_cast<int>(li),
                                              layer.bank.mean_radius(),
                                              r1_fraction(layer.bank, cfg.r1_tolerance),
                                              layer.spec.plasticity.base_lr);
                x = std::move(f.output);
            }
            ++step;
        }
    }
}

}  // namespace

void train_unsupervised(Model& model, const Dataset& train, const UnsupervisedRunConfig& cfg,
                        MetricsWriter* metrics) {
    if (train.images.n == 0) return;
    if (cfg.simultaneous) {
        train_simultaneous(model, train, cfg, metrics);
        return;
    }
    for (std::size_t li = 0; li < model.layers.size(); ++li)
        train_one_layer(model, static_cast<int>(li), train, cfg, metrics);
}

ClassifierHead make_head(int num_classes, int dim, float dropout, std::uint64_t /*seed*/) {
    ClassifierHead h;
    h.num_classes = num_classes;
    h.dim = dim;
    h.weights.assign(static_cast<std::size_t>(num_classes) * dim, 0.0f);
    h.bias.assign(num_classes, 0.0f);
    h.dropout = dropout;
    return h;
}

std::vector<float> classifier_forward(const ClassifierHead& head, const float* features,
                                      int batch, Mode mode, std::mt19937_64* rng) {
    const int c = head.num_classes;
    const int d = head.dim;
    std::vector<float> x;
    const float* in = features;
    if (mode == Mode::train && head.dropout > 0.0f) {
        if (!rng) throw std::invalid_argument("classifier_forward: train mode needs an rng");
        x.assign(features, features + static_cast<std::size_t>(batch) * d);
        std::uniform_real_distribution<float> uni(0.0f, 1.0f);
        const float scale = 1.0f / (1.0f - head.dropout);
        for (auto& v : x) v = uni(*rng) < head.dropout ? 0.0f : v * scale;
        in = x.data();
    }
    std::vector<float> logits(static_cast<std::size_t>(batch) * c);
    sgemm(false, true, batch, c, d, 1.0f, in, d, head.weights.data(), d, 0.0f,
          logits.data(), c);
    for (int b = 0; b < batch; ++b) {
        float* row = logits.data() + static_cast<std::size_t>(b) * c;
        for (int k = 0; k < c; ++k) row[k] += head.bias[k];
        float mx = row[0];
        for (int k = 1; k < c; ++k) mx = std::max(mx, row[k]);
        float sum = 0.0f;
        for (int k = 0; k < c; ++k) sum += std::exp(row[k] - mx);
        const float lse = mx + std::log(sum);
        for (int k = 0; k < c; ++k) row[k] -= lse;  // log-probabilities
    }
    return logits;
}

HeadGradients classifier_backward(const ClassifierHead& head, const float* features,
                                  const int* labels, int batch) {
    const int c = head.num_classes;
    const int d = head.dim;
    std::vector<float> logp = classifier_forward(head, features, batch, Mode::eval, nullptr);

    HeadGradients g;
    g.dw.assign(static_cast<std::size_t>(c) * d, 0.0f);
    g.db.assign(c, 0.0f);
    std::vector<float> delta(static_cast<std::size_t>(batch) * c);  // softmax - onehot
    double loss = 0.0;
    for (int b = 0; b < batch; ++b) {
        const int y = labels[b];
        if (y < 0 || y >= c) throw std::invalid_argument("classifier_backward: label out of range");
        const float* lp = logp.data() + static_cast<std::size_t>(b) * c;
        loss -= lp[y];
        float* dr = delta.data() + static_cast<std::size_t>(b) * c;
        for (int k = 0; k < c; ++k) dr[k] = std::exp(lp[k]) - (k == y ? 1.0f : 0.0f);
    }
    const float inv_b = 1.0f / batch;
    sgemm(true, false, c, d, batch, inv_b, delta.data(), c, features, d, 0.0f, g.dw.data(), d);
    for (int b = 0; b < batch; ++b)
        for (int k = 0; k < c; ++k)
            g.db[k] += delta[static_cast<std::size_t>(b) * c + k] * inv_b;
    g.loss = static_cast<float>(loss / batch);
    return g;
}

float lr_schedule(float progress, float initial_lr) {
    static constexpr float kMilestones[] = {0.20f, 0.35f, 0.50f, 0.60f, 0.70f, 0.80f, 0.90f};
    int m = 0;
    for (float ms : kMilestones)
        if (ms <= progress) ++m;
    return initial_lr * std::pow(2.0f, static_cast<float>(-m));
}

FeatureMatrix extract_features(Model& model, const Dataset& ds, int upto_layer,
                               int forward_batch) {
    FeatureMatrix fm;
    fm.n = ds.images.n;
    fm.dim = static_cast<int>(feature_dim(model, upto_layer));
    fm.x.resize(static_cast<std::size_t>(fm.n) * fm.dim);
    const std::size_t per_img =
        static_cast<std::size_t>(ds.images.c) * ds.images.h * ds.images.w;
    for (long start = 0; start < fm.n; start += forward_batch) {
        const int bsz = static_cast<int>(std::min<long>(forward_batch, fm.n - start));
        Tensor batch(bsz, ds.images.c, ds.images.h, ds.images.w);
        for (int i = 0; i < bsz; ++i)
            std::copy(ds.images.image(static_cast<int>(start) + i),
                      ds.images.image(static_cast<int>(start) + i) + per_img, batch.image(i));
        Tensor out = forward(model, batch, upto_layer, Mode::eval);
        if (static_cast<long>(out.size()) != static_cast<long>(bsz) * fm.dim)
            throw std::logic_error("extract_features: feature dim mismatch");
        std::copy(out.v.begin(), out.v.end(),
                  fm.x.begin() + static_cast<std::size_t>(start) * fm.dim);
    }
    return fm;
}

namespace {

struct AdamState {
    std::vector<float> m, v;
    long t = 0;
    static constexpr float kBeta1 = 0.9f, kBeta2 = 0.999f, kEps = 1e-8f;

    explicit AdamState(std::size_t size) : m(size, 0.0f), v(size, 0.0f) {}

    void step(std::vector<float>& param, const std::vector<float>& grad, float lr) {
        ++t;
        const float bc1 = 1.0f - std::pow(kBeta1, static_cast<float>(t));
        const float bc2 = 1.0f - std::pow(kBeta2, static_cast<float>(t));
        for (std::size_t i = 0; i < param.size(); ++i) {
            m[i] = kBeta1 * m[i] + (1.0f - kBeta1) * grad[i];
            v[i] = kBeta2 * v[i] + (1.0f - kBeta2) * grad[i] * grad[i];
            param[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kEps);
        }
    }
};

struct MomentumState {
    std::vector<float> vel;
    float momentum;
    MomentumState(std::size_t size, float mom) : vel(size, 0.0f), momentum(mom) {}
    void step(std::vector<float>& param, const std::vector<float>& grad, float lr) {
        for (std::size_t i = 0; i < param.size(); ++i) {
            vel[i] = momentum * vel[i] - lr * grad[i];
            param[i] += vel[i];
        }
    }
};

float accuracy_on(const ClassifierHead& head, const FeatureMatrix& features,
                  const std::vector<int>& labels, const std::vector<int>& idx) {
    if (idx.empty()) return 0.0f;
    long correct = 0;
    constexpr int kChunk = 256;
    std::vector<float> buf;
    for (std::size_t start = 0; start < idx.size(); start += kChunk) {
        const int bsz = static_cast<int>(std::min<std::size_t>(kChunk, idx.size() - start));
        buf.resize(static_cast<std::size_t>(bsz) * head.dim);
        for (int i = 0; i < bsz; ++i)
            std::copy(features.row(idx[start + i]), features.row(idx[start + i]) + head.dim,
                      buf.begin() + static_cast<std::size_t>(i) * head.dim);
        const auto logp = classifier_forward(head, buf.data(), bsz, Mode::eval, nullptr);
        for (int i = 0; i < bsz; ++i) {
            const float* lp = logp.data() + static_cast<std::size_t>(i) * head.num_classes;
            int best = 0;
            for (int k = 1; k < head.num_classes; ++k)
                if (lp[k] > lp[best]) best = k;
            if (best == labels[idx[start + i]]) ++correct;
        }
    }
    return static_cast<float>(correct) / idx.size();
}

}  // namespace

SupervisedResult train_classifier(const FeatureMatrix& features, const std::vector<int>& labels,
                                  int num_classes, const SupervisedRunConfig& cfg,
                                  MetricsWriter* metrics) {
    if (features.n != static_cast<long>(labels.size()))
        throw std::invalid_argument("train_classifier: feature/label count mismatch");

    std::mt19937_64 rng(cfg.seed);
    std::vector<int> order(features.n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const long val_n = static_cast<long>(features.n * cfg.validation_fraction);
    std::vector<int> val_idx(order.begin(), order.begin() + val_n);
    std::vector<int> train_idx(order.begin() + val_n, order.end());

    ClassifierHead head = make_head(num_classes, features.dim, cfg.dropout, cfg.seed);
    AdamState adam_w(head.weights.size()), adam_b(head.bias.size());
    MomentumState mom_w(head.weights.size(), cfg.momentum),
        mom_b(head.bias.size(), cfg.momentum);

    std::vector<float> batch_x;
    std::vector<int> batch_y;
    SupervisedResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const float lr =
            lr_schedule(static_cast<float>(epoch) / cfg.epochs, cfg.initial_lr);
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        double epoch_loss = 0.0;
        long batches = 0;
        for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
            const int bsz = static_cast<int>(
                std::min<std::size_t>(cfg.batch_size, train_idx.size() - start));
            batch_x.resize(static_cast<std::size_t>(bsz) * features.dim);
            batch_y.resize(bsz);
            for (int i = 0; i < bsz; ++i) {
                const int src = train_idx[start + i];
                std::copy(features.row(src), features.row(src) + features.dim,
                          batch_x.begin() + static_cast<std::size_t>(i) * features.dim);
                batch_y[i] = labels[src];
            }
            if (head.dropout > 0.0f) {
                std::uniform_real_distribution<float> uni(0.0f, 1.0f);
                const float scale = 1.0f / (1.0f - head.dropout);
                for (auto& v : batch_x) v = uni(rng) < head.dropout ? 0.0f : v * scale;
            }
            HeadGradients g = classifier_backward(head, batch_x.data(), batch_y.data(), bsz);
            if (!std::isfinite(g.loss))
                throw std::runtime_error("train_classifier: loss diverged (NaN/Inf)");
            if (cfg.optimizer == Optimizer::adam) {
                adam_w.step(head.weights, g.dw, lr);
                adam_b.step(head.bias, g.db, lr);
            } else {
                mom_w.step(head.weights, g.dw, lr);
                mom_b.step(head.bias, g.db, lr);
            }
            epoch_loss += g.loss;
            ++batches;
        }
        const float train_acc = accuracy_on(head, features, labels, train_idx);
        const float val_acc = accuracy_on(head, features, labels, val_idx);
        result.final_train_acc = train_acc;
        result.final_val_acc = val_acc;
        if (metrics)
            metrics->supervised_row(epoch + 1, lr,
                                    static_cast<float>(epoch_loss / std::max(batches, 1L)),
                                    train_acc, val_acc);
    }
    result.head = std::move(head);
    return result;
}

EvalResult evaluate(const ClassifierHead& head, const FeatureMatrix& features,
                    const std::vector<int>& labels, int num_classes) {
    EvalResult r;
    std::vector<long> correct(num_classes, 0), total(num_classes, 0);
    constexpr int kChunk = 256;
    std::vector<float> buf;
    long all_correct = 0;
    for (long start = 0; start < features.n; start += kChunk) {
        const int bsz = static_cast<int>(std::min<long>(kChunk, features.n - start));
        buf.assign(features.row(start),
                   features.row(start) + static_cast<std::size_t>(bsz) * features.dim);
        const auto logp = classifier_forward(head, buf.data(), bsz, Mode::eval, nullptr);
        for (int i = 0; i < bsz; ++i) {
            const float* lp = logp.data() + static_cast<std::size_t>(i) * num_classes;
            int best = 0;
            for (int k = 1; k < num_classes; ++k)
                if (lp[k] > lp[best]) best = k;
            const int y = labels[start + i];
            ++total[y];
            if (best == y) {
                ++correct[y];
                ++all_correct;
            }
        }
    }
    r.accuracy = features.n ? static_cast<float>(all_correct) / features.n : 0.0f;
    r.per_class.resize(num_classes);
    for (int k = 0; k < num_classes; ++k)
        r.per_class[k] = total[k] ? static_cast<float>(correct[k]) / total[k] : 0.0f;
    return r;
}

}  // namespace hebbnet
