#include "hebbnet/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

namespace hebbnet {

R1Report count_r1(const Model& model, float tolerance) {
    if (!(tolerance > 0.0f)) throw std::invalid_argument("count_r1: tolerance must be > 0");
    R1Report rep;
    rep.tolerance = tolerance;
    for (const Layer& layer : model.layers) {
        rep.radii.push_back(layer.bank.radii);
        int hits = 0;
        for (float r : layer.bank.radii)
            if (std::fabs(r - 1.0f) <= tolerance) ++hits;
        rep.fraction.push_back(layer.bank.num_neurons
                                   ? static_cast<float>(hits) / layer.bank.num_neurons
                                   : 0.0f);
    }
    return rep;
}

namespace {

// eval-mode BN as a fixed per-channel affine map
Tensor bn_eval(const Tensor& x, const BatchNormState& st) {
    Tensor out(x.n, x.c, x.h, x.w);
    const long plane = static_cast<long>(x.h) * x.w;
    for (int b = 0; b < x.n; ++b)
        for (int ch = 0; ch < x.c; ++ch) {
            const float inv = 1.0f / std::sqrt(st.running_var[ch] + st.eps);
            const float mu = st.running_mean[ch];
            const float* src = x.image(b) + static_cast<std::size_t>(ch) * plane;
            float* dst = out.image(b) + static_cast<std::size_t>(ch) * plane;
            for (long i = 0; i < plane; ++i) dst[i] = (src[i] - mu) * inv;
        }
    return out;
}

Tensor bn_eval_grad(const Tensor& dy, const BatchNormState& st) {
    Tensor dx(dy.n, dy.c, dy.h, dy.w);
    const long plane = static_cast<long>(dy.h) * dy.w;
    for (int b = 0; b < dy.n; ++b)
        for (int ch = 0; ch < dy.c; ++ch) {
            const float inv = 1.0f / std::sqrt(st.running_var[ch] + st.eps);
            const float* src = dy.image(b) + static_cast<std::size_t>(ch) * plane;
            float* dst = dx.image(b) + static_cast<std::size_t>(ch) * plane;
            for (long i = 0; i < plane; ++i) dst[i] = src[i] * inv;
        }
    return dx;
}

Tensor conv_input_grad(const Tensor& du, const NeuronBank& bank, int padding, int in_h,
                       int in_w) {
    Tensor dx(du.n, bank.in_channels, in_h, in_w);
    const int k = bank.kernel;
    for (int b = 0; b < du.n; ++b)
        for (int kn = 0; kn < bank.num_neurons; ++kn) {
            const float* w = bank.row(kn);
            for (int oy = 0; oy < du.h; ++oy)
                for (int ox = 0; ox < du.w; ++ox) {
                    const float g = du.at(b, kn, oy, ox);
                    if (g == 0.0f) continue;
                    const int y0 = oy - padding;
                    const int x0 = ox - padding;
                    for (int ch = 0; ch < bank.in_channels; ++ch)
                        for (int ky = 0; ky < k; ++ky) {
                            const int y = y0 + ky;
                            if (y < 0 || y >= in_h) continue;
                            for (int kx = 0; kx < k; ++kx) {
                                const int x = x0 + kx;
                                if (x < 0 || x >= in_w) continue;
                                dx.at(b, ch, y, x) +=
                                    g * w[(static_cast<std::size_t>(ch) * k + ky) * k + kx];
                            }
                        }
                }
        }
    return dx;
}

struct PoolRecord {
    Tensor out;
    std::vector<int> argmax;   // max: flat input index per output cell
    std::vector<int> counts;   // avg: non-padded cell count per output cell
};

PoolRecord pool_record(const Tensor& x, const LayerSpec& s) {
    const PoolKind kind = s.pool_type == PoolType::max ? PoolKind::max : PoolKind::avg;
    PoolRecord rec;
    const int out_h = pool_output_dim(x.h, s.pool_kernel, s.pool_stride, s.pool_padding);
    const int out_w = pool_output_dim(x.w, s.pool_kernel, s.pool_stride, s.pool_padding);
    rec.out = Tensor(x.n, x.c, out_h, out_w);
    rec.argmax.assign(rec.out.size(), -1);
    rec.counts.assign(rec.out.size(), 0);
    for (int b = 0; b < x.n; ++b)
        for (int ch = 0; ch < x.c; ++ch)
            for (int oy = 0; oy < out_h; ++oy)
                for (int ox = 0; ox < out_w; ++ox) {
                    float best = -std::numeric_limits<float>::infinity();
                    int best_idx = -1;
                    float sum = 0.0f;
                    int count = 0;
                    for (int ky = 0; ky < s.pool_kernel; ++ky) {
                        const int y = oy * s.pool_stride - s.pool_padding + ky;
                        if (y < 0 || y >= x.h) continue;
                        for (int kx = 0; kx < s.pool_kernel; ++kx) {
                            const int xx = ox * s.pool_stride - s.pool_padding + kx;
                            if (xx < 0 || xx >= x.w) continue;
                            const float v = x.at(b, ch, y, xx);
                            if (v > best) {
                                best = v;
                                best_idx = static_cast<int>(x.index(b, ch, y, xx));
                            }
                            sum += v;
                            ++count;
                        }
                    }
                    const std::size_t oi = rec.out.index(b, ch, oy, ox);
                    rec.out.v[oi] = kind == PoolKind::max ? best : sum / count;
                    rec.argmax[oi] = best_idx;
                    rec.counts[oi] = count;
                }
    return rec;
}

Tensor pool_backward(const Tensor& dy, const PoolRecord& rec, const Tensor& fwd_in,
                     const LayerSpec& s) {
    Tensor dx(fwd_in.n, fwd_in.c, fwd_in.h, fwd_in.w);
    if (s.pool_type == PoolType::max) {
        for (std::size_t i = 0; i < dy.v.size(); ++i)
            if (rec.argmax[i] >= 0) dx.v[rec.argmax[i]] += dy.v[i];
        return dx;
    }
    for (int b = 0; b < dy.n; ++b)
        for (int ch = 0; ch < dy.c; ++ch)
            for (int oy = 0; oy < dy.h; ++oy)
                for (int ox = 0; ox < dy.w; ++ox) {
                    const std::size_t oi = dy.index(b, ch, oy, ox);
                    const float g = dy.v[oi] / rec.counts[oi];
                    for (int ky = 0; ky < s.pool_kernel; ++ky) {
                        const int y = oy * s.pool_stride - s.pool_padding + ky;
                        if (y < 0 || y >= fwd_in.h) continue;
                        for (int kx = 0; kx < s.pool_kernel; ++kx) {
                            const int xx = ox * s.pool_stride - s.pool_padding + kx;
                            if (xx < 0 || xx >= fwd_in.w) continue;
                            dx.at(b, ch, y, xx) += g;
                        }
                    }
                }
    return dx;
}

struct LinearTrace {
    std::vector<Tensor> conv_inputs;   // post-BN input of each layer's conv
    std::vector<Tensor> conv_outputs;  // pre-pool
    std::vector<PoolRecord> pools;     // empty record if layer has no pooling
    float response = 0.0f;
    int cy = 0, cx = 0;
};

// Forward through the linear path (activations bypassed) up to and
// including the target layer's convolution.
LinearTrace linear_forward(Model& model, const Tensor& image, int layer, int neuron) {
    LinearTrace tr;
    Tensor x = image;
    for (int li = 0; li <= layer; ++li) {
        Layer& l = model.layers[li];
        Tensor bn = bn_eval(x, l.bn);
        tr.conv_inputs.push_back(bn);
        Tensor u = conv_forward(bn, l.bank, l.spec.conv_padding);
        tr.conv_outputs.push_back(u);
        if (li == layer) {
            tr.cy = u.h / 2;
            tr.cx = u.w / 2;
            tr.response = u.at(0, neuron, tr.cy, tr.cx);
            tr.pools.emplace_back();
            break;
        }
        if (l.spec.pool_type != PoolType::none) {
            tr.pools.push_back(pool_record(u, l.spec));
            x = tr.pools.back().out;
        } else {
            tr.pools.emplace_back();
            x = u;
        }
    }
    return tr;
}

}  // namespace

float linear_response(Model& model, const Tensor& image, int layer, int neuron) {
    return linear_forward(model, image, layer, neuron).response;
}

Tensor linear_response_grad(Model& model, const Tensor& image, int layer, int neuron,
                            float* response_out) {
    if (layer < 0 || layer >= static_cast<int>(model.layers.size()))
        throw std::invalid_argument("linear_response_grad: layer out of range");
    if (neuron < 0 || neuron >= model.layers[layer].bank.num_neurons)
        throw std::invalid_argument("linear_response_grad: neuron out of range");

    LinearTrace tr = linear_forward(model, image, layer, neuron);
    if (response_out) *response_out = tr.response;

    // seed gradient: single unit at the probed output cell
    Tensor g(1, tr.conv_outputs[layer].c, tr.conv_outputs[layer].h, tr.conv_outputs[layer].w);
    g.at(0, neuron, tr.cy, tr.cx) = 1.0f;

    for (int li = layer; li >= 0; --li) {
        Layer& l = model.layers[li];
        if (li < layer && l.spec.pool_type != PoolType::none)
            g = pool_backward(g, tr.pools[li], tr.conv_outputs[li], l.spec);
        g = conv_input_grad(g, l.bank, l.spec.conv_padding, tr.conv_inputs[li].h,
                            tr.conv_inputs[li].w);
        g = bn_eval_grad(g, l.bn);
    }
    return g;
}

namespace {

void project_unit(Tensor& t) {
    double s = 0.0;
    for (float v : t.v) s += static_cast<double>(v) * v;
    const float inv = 1.0f / static_cast<float>(std::sqrt(std::max(s, 1e-30)));
    for (float& v : t.v) v *= inv;
}

}  // namespace

ReceptiveField receptive_field_pgd(Model& model, int layer, int neuron,
                                   const PgdOptions& opts) {
    ReceptiveField rf;
    rf.layer = layer;
    rf.neuron = neuron;

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<float> dist(0.0f, 1.0f);
    Tensor x(1, model.arch.input_channels, model.arch.input_res, model.arch.input_res);
    for (float& v : x.v) v = dist(rng);
    project_unit(x);

    float best = -std::numeric_limits<float>::infinity();
    Tensor best_x = x;
    int since_improvement = 0;
    int step = 0;
    for (; step < opts.steps; ++step) {
        float resp;
        Tensor g = linear_response_grad(model, x, layer, neuron, &resp);
        if (resp > best + opts.convergence_delta) {
            best = resp;
            best_x = x;
            since_improvement = 0;
        } else if (++since_improvement >= opts.convergence_window) {
            rf.converged = true;
            ++step;
            break;
        }
        project_unit(g);  // normalized-gradient ascent
        for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] += opts.step_size * g.v[i];
        project_unit(x);
    }
    rf.image = best_x;
    rf.activation = linear_response(model, rf.image, layer, neuron);
    rf.iterations = step;
    return rf;
}

RfGeometry receptive_field_geometry(const Model& model, int layer) {
    RfGeometry g;
    for (int li = 0; li <= layer; ++li) {
        const LayerSpec& s = model.arch.layers[li];
        // conv: stride 1
        g.size += (s.conv_kernel - 1) * g.jump;
        g.start += ((s.conv_kernel - 1) / 2.0f - s.conv_padding) * g.jump;
        if (li == layer) break;
        if (s.pool_type != PoolType::none) {
            g.size += (s.pool_kernel - 1) * g.jump;
            g.start += ((s.pool_kernel - 1) / 2.0f - s.pool_padding) * g.jump;
            g.jump *= s.pool_stride;
        }
    }
    return g;
}

std::vector<PatchHit> top_activating_patches(Model& model, const Dataset& ds, int layer,
                                             int neuron, int k) {
    if (k < 1) throw std::invalid_argument("top_activating_patches: k must be >= 1");
    const RfGeometry geo = receptive_field_geometry(model, layer);
    std::vector<PatchHit> hits;

    for (int i = 0; i < ds.images.n; ++i) {
        Tensor img(1, ds.images.c, ds.images.h, ds.images.w);
        std::copy(ds.images.image(i), ds.images.image(i) + img.size(), img.v.begin());
        // pre-activation of the target layer's conv on the real forward path
        Tensor x = img;
        for (int li = 0; li < layer; ++li) x = forward_layer(x, model.layers[li], Mode::eval);
        Layer& l = model.layers[layer];
        x = bn_eval(x, l.bn);
        Tensor u = conv_forward(x, l.bank, l.spec.conv_padding);

        float best = -std::numeric_limits<float>::infinity();
        int by = 0, bx = 0;
        for (int y = 0; y < u.h; ++y)
            for (int xx = 0; xx < u.w; ++xx)
                if (u.at(0, neuron, y, xx) > best) {
                    best = u.at(0, neuron, y, xx);
                    by = y;
                    bx = xx;
                }
        PatchHit h;
        h.image_index = i;
        h.activation = best;
        const float cy = geo.start + by * geo.jump;
        const float cx = geo.start + bx * geo.jump;
        h.y0 = std::max(0, static_cast<int>(std::lround(cy - (geo.size - 1) / 2.0f)));
        h.x0 = std::max(0, static_cast<int>(std::lround(cx - (geo.size - 1) / 2.0f)));
        h.y1 = std::min(ds.images.h - 1, h.y0 + geo.size - 1);
        h.x1 = std::min(ds.images.w - 1, h.x0 + geo.size - 1);
        hits.push_back(h);
    }
    std::sort(hits.begin(), hits.end(),
              [](const PatchHit& a, const PatchHit& b) { return a.activation > b.activation; });
    if (static_cast<int>(hits.size()) > k) hits.resize(k);
    return hits;
}

void export_image_grid(const std::vector<Tensor>& images, int grid_cols,
                       const std::string& path) {
    if (images.empty()) throw std::invalid_argument("export_image_grid: no images");
    const int c = images[0].c, h = images[0].h, w = images[0].w;
    for (const Tensor& t : images)
        if (t.c != c || t.h != h || t.w != w)
            throw std::invalid_argument("export_image_grid: images must share one shape");
    const int cols = std::min<int>(grid_cols, static_cast<int>(images.size()));
    const int rows = (static_cast<int>(images.size()) + cols - 1) / cols;
    const int out_w = cols * w + (cols - 1);
    const int out_h = rows * h + (rows - 1);

    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(out_w) * out_h * 3, 0);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const Tensor& t = images[i];
        float lo = t.v[0], hi = t.v[0];
        for (float v : t.v) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const float scale = hi > lo ? 255.0f / (hi - lo) : 0.0f;
        const int gy = static_cast<int>(i) / cols, gx = static_cast<int>(i) % cols;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t o =
                    (static_cast<std::size_t>(gy * (h + 1) + y) * out_w + gx * (w + 1) + x) * 3;
                for (int ch = 0; ch < 3; ++ch) {
                    const float v = t.at(0, c == 3 ? ch : 0, y, x);
                    rgb[o + ch] =
                        static_cast<std::uint8_t>(std::clamp((v - lo) * scale, 0.0f, 255.0f));
                }
            }
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("export_image_grid: cannot write " + path);
    f << "P6\n" << out_w << " " << out_h << "\n255\n";
    f.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (!f) throw std::runtime_error("export_image_grid: write failed for " + path);
}

}  // namespace hebbnet
