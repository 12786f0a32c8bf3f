#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "hebbnet/analysis.hpp"
#include "hebbnet/training.hpp"

using namespace hebbnet;
namespace fs = std::filesystem;

namespace {

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += static_cast<double>(a[i]) * b[i];
        aa += static_cast<double>(a[i]) * a[i];
        bb += static_cast<double>(b[i]) * b[i];
    }
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

Dataset random_dataset(int n, int c, int res, unsigned seed) {
    Dataset ds;
    ds.images = Tensor(n, c, res, res);
    std::mt19937 rng(seed);
    std::normal_distribution<float> d(0.0f, 1.0f);
    for (auto& v : ds.images.v) v = d(rng);
    ds.normalized = true;
    return ds;
}

// small trained single-layer model to probe
Model toy_model(unsigned seed, int width = 8) {
    ArchitectureSpec arch = build_architecture(16, 1, width, 2);
    arch.layers.resize(1);
    Model model = make_model(arch, seed);
    Dataset ds = random_dataset(40, 1, 16, seed + 100);
    UnsupervisedRunConfig cfg;
    cfg.seed = seed + 1;
    cfg.max_iterations = 20;
    train_unsupervised(model, ds, cfg);
    return model;
}

}  // namespace

TEST_CASE("count_r1: hand-built radii") {
    ArchitectureSpec arch = build_fully_connected(8, 1, 4);
    Model model = make_model(arch, 1);
    model.layers[0].bank.radii = {1.0f, 1.04f, 0.96f, 2.0f};
    R1Report rep = count_r1(model, 0.05f);
    REQUIRE(rep.fraction.size() == 1);
    CHECK(rep.fraction[0] == doctest::Approx(0.75f));
    CHECK(rep.radii[0].size() == 4);
    // near-boundary values inside the band
    model.layers[0].bank.radii = {1.049f, 0.951f};
    model.layers[0].bank.num_neurons = 2;
    CHECK(count_r1(model, 0.05f).fraction[0] == doctest::Approx(1.0f));
    // tighter tolerance drops them
    CHECK(count_r1(model, 0.01f).fraction[0] == doctest::Approx(0.0f));
}

TEST_CASE("count_r1 is invariant to radius order") {
    ArchitectureSpec arch = build_fully_connected(8, 1, 5);
    Model model = make_model(arch, 2);
    model.layers[0].bank.radii = {0.5f, 1.0f, 1.02f, 3.0f, 0.99f};
    const float f1 = count_r1(model, 0.05f).fraction[0];
    std::reverse(model.layers[0].bank.radii.begin(), model.layers[0].bank.radii.end());
    CHECK(count_r1(model, 0.05f).fraction[0] == doctest::Approx(f1));
}

TEST_CASE("linear_response_grad matches finite differences") {
    Model model = toy_model(3);
    Tensor img(1, 1, 16, 16);
    std::mt19937 rng(4);
    std::normal_distribution<float> d(0.0f, 0.5f);
    for (auto& v : img.v) v = d(rng);

    float resp = 0.0f;
    Tensor grad = linear_response_grad(model, img, 0, 2, &resp);
    CHECK(resp == doctest::Approx(linear_response(model, img, 0, 2)));

    const float eps = 1e-2f;
    std::mt19937 pick(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t idx = pick() % img.v.size();
        Tensor p = img, m = img;
        p.v[idx] += eps;
        m.v[idx] -= eps;
        const double fd = (linear_response(model, p, 0, 2) -
                           linear_response(model, m, 0, 2)) / (2.0 * eps);
        CHECK(grad.v[idx] == doctest::Approx(fd).epsilon(1e-3).scale(1.0));
    }
}

TEST_CASE("receptive_field_pgd: unit norm, positive response, determinism") {
    Model model = toy_model(6);
    PgdOptions opts;
    opts.seed = 7;
    ReceptiveField rf = receptive_field_pgd(model, 0, 1, opts);
    double norm = 0;
    for (float v : rf.image.v) norm += static_cast<double>(v) * v;
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(rf.activation > 0.0f);
    ReceptiveField rf2 = receptive_field_pgd(model, 0, 1, opts);
    CHECK(rf.image.v == rf2.image.v);
}

TEST_CASE("receptive_field_pgd on layer 1 recovers the kernel direction") {
    Model model = toy_model(8);
    const NeuronBank& bank = model.layers[0].bank;
    const int k = bank.kernel;
    PgdOptions opts;
    opts.seed = 9;
    for (int neuron = 0; neuron < 3; ++neuron) {
        ReceptiveField rf = receptive_field_pgd(model, 0, neuron, opts);
        // the center kxk window of the optimized image should align with the kernel
        const int y0 = 16 / 2 - k / 2, x0 = 16 / 2 - k / 2;
        std::vector<float> window, kernel(bank.row(neuron), bank.row(neuron) + bank.synapses);
        for (int y = 0; y < k; ++y)
            for (int x = 0; x < k; ++x) window.push_back(rf.image.at(0, 0, y0 + y, x0 + x));
        CHECK(cosine(window, kernel) > 0.99);
    }
}

TEST_CASE("receptive_field_geometry composes layer geometry") {
    ArchitectureSpec arch = build_architecture(32, 3, 8, 2);
    Model model = make_model(arch, 10);
    // geometry is taken at the layer's conv output: earlier pools count,
    // the layer's own pool does not
    RfGeometry g1 = receptive_field_geometry(model, 0);
    CHECK(g1.size == 5);  // conv k=5
    CHECK(g1.jump == 1);
    RfGeometry g2 = receptive_field_geometry(model, 1);
    // pool0 k=4 s=2: size 5+3=8, jump 2; conv k=3: size 8+2*2=12
    CHECK(g2.size == 12);
    CHECK(g2.jump == 2);
    RfGeometry g3 = receptive_field_geometry(model, 2);
    CHECK(g3.size == 26);
    CHECK(g3.jump == 4);
}

TEST_CASE("top_activating_patches: boxes are kernel-sized at layer 1 and sorted") {
    Model model = toy_model(11);
    Dataset ds = random_dataset(12, 1, 16, 12);
    std::vector<PatchHit> hits = top_activating_patches(model, ds, 0, 0, 5);
    REQUIRE(hits.size() == 5);
    const int k = model.layers[0].bank.kernel;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        CHECK(hits[i].y1 - hits[i].y0 + 1 <= k);
        CHECK(hits[i].x1 - hits[i].x0 + 1 <= k);
        CHECK(hits[i].y0 >= 0);
        CHECK(hits[i].x1 <= 15);
        CHECK(hits[i].image_index >= 0);
        CHECK(hits[i].image_index < 12);
        if (i > 0) CHECK(hits[i - 1].activation >= hits[i].activation);
    }
    // one hit per image at most
    std::vector<int> idx;
    for (const auto& h : hits) idx.push_back(h.image_index);
    std::sort(idx.begin(), idx.end());
    CHECK(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
}

TEST_CASE("export_image_grid writes a valid deterministic P6 file") {
    std::vector<Tensor> imgs;
    for (int i = 0; i < 4; ++i) {
        Tensor t(1, 1, 5, 5);
        for (int p = 0; p < 25; ++p) t.v[p] = static_cast<float>((p * (i + 1)) % 7);
        imgs.push_back(t);
    }
    const fs::path a = fs::temp_directory_path() / "hebbnet_grid_a.ppm";
    const fs::path b = fs::temp_directory_path() / "hebbnet_grid_b.ppm";
    export_image_grid(imgs, 2, a.string());
    export_image_grid(imgs, 2, b.string());

    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    fa >> magic >> w >> h >> maxval;
    CHECK(magic == "P6");
    CHECK(maxval == 255);
    // 2x2 grid of 5x5 tiles with 1-px separators: 5+1+5 = 11
    CHECK(w == 11);
    CHECK(h == 11);
    std::vector<char> payload((std::istreambuf_iterator<char>(fa)),
                              std::istreambuf_iterator<char>());
    CHECK(payload.size() == 1 + 3u * 11 * 11);  // newline after maxval + RGB
    // byte-identical across runs
    std::ifstream fa2(a, std::ios::binary);
    std::vector<char> da((std::istreambuf_iterator<char>(fa2)), std::istreambuf_iterator<char>());
    std::vector<char> db((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(da == db);
    fs::remove(a);
    fs::remove(b);
}
