#include <doctest.h>

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <filesystem>
#include <fstream>
#include <random>

#include "hebbnet/data.hpp"

using namespace hebbnet;
namespace fs = std::filesystem;

namespace {

void write_be32(std::ofstream& f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<char*>(b), 4);
}

// tiny IDX pair: n images h x w with pixel value = (i + y + x) % 256
void write_idx(const fs::path& img, const fs::path& lbl, int n, int h, int w) {
    std::ofstream fi(img, std::ios::binary);
    write_be32(fi, 0x803);
    write_be32(fi, n);
    write_be32(fi, h);
    write_be32(fi, w);
    for (int i = 0; i < n; ++i)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                fi.put(static_cast<char>((i + y + x) % 256));
    std::ofstream fl(lbl, std::ios::binary);
    write_be32(fl, 0x801);
    write_be32(fl, n);
    for (int i = 0; i < n; ++i) fl.put(static_cast<char>(i % 10));
}

void gzip_file(const fs::path& src, const fs::path& dst) {
    std::ifstream in(src, std::ios::binary);
    std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
    gzFile gz = gzopen(dst.string().c_str(), "wb");
    REQUIRE(gz != nullptr);
    gzwrite(gz, buf.data(), static_cast<unsigned>(buf.size()));
    gzclose(gz);
}

void write_cifar_batch(const fs::path& path, int n) {
    std::ofstream f(path, std::ios::binary);
    for (int i = 0; i < n; ++i) {
        f.put(static_cast<char>(i % 10));  // label
        for (int c = 0; c < 3; ++c)
            for (int p = 0; p < 1024; ++p)
                f.put(static_cast<char>((i * 7 + c * 11 + p) % 256));
    }
}

fs::path tmpdir() {
    const fs::path d = fs::temp_directory_path() / "hebbnet_data_test";
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("load_mnist: dimensions, [0,1] scaling, label range") {
    const fs::path d = tmpdir();
    write_idx(d / "img.idx", d / "lbl.idx", 12, 28, 28);
    Dataset ds = load_mnist((d / "img.idx").string(), (d / "lbl.idx").string());
    CHECK(ds.images.n == 12);
    CHECK(ds.images.c == 1);
    CHECK(ds.images.h == 28);
    CHECK(ds.images.w == 28);
    CHECK(ds.num_classes == 10);
    CHECK_FALSE(ds.normalized);
    CHECK(ds.images.at(0, 0, 0, 0) == doctest::Approx(0.0f));
    CHECK(ds.images.at(0, 0, 1, 2) == doctest::Approx(3.0f / 255.0f));
    for (int l : ds.labels) {
        CHECK(l >= 0);
        CHECK(l <= 9);
    }
}

TEST_CASE("load_mnist: gzip-compressed files load identically") {
    const fs::path d = tmpdir();
    write_idx(d / "img2.idx", d / "lbl2.idx", 5, 8, 8);
    gzip_file(d / "img2.idx", d / "img2.idx.gz");
    gzip_file(d / "lbl2.idx", d / "lbl2.idx.gz");
    Dataset plain = load_mnist((d / "img2.idx").string(), (d / "lbl2.idx").string());
    Dataset gz = load_mnist((d / "img2.idx.gz").string(), (d / "lbl2.idx.gz").string());
    CHECK(plain.images.v == gz.images.v);
    CHECK(plain.labels == gz.labels);
}

TEST_CASE("load_mnist: bad magic and count mismatch rejected") {
    const fs::path d = tmpdir();
    {
        std::ofstream f(d / "bad.idx", std::ios::binary);
        write_be32(f, 0x999);
        write_be32(f, 1);
        write_be32(f, 2);
        write_be32(f, 2);
        f.put(0);
        f.put(0);
        f.put(0);
        f.put(0);
    }
    write_idx(d / "img3.idx", d / "lbl3.idx", 4, 4, 4);
    CHECK_THROWS(load_mnist((d / "bad.idx").string(), (d / "lbl3.idx").string()));
    // label file with wrong count
    write_idx(d / "img4.idx", d / "lbl4.idx", 3, 4, 4);
    CHECK_THROWS(load_mnist((d / "img3.idx").string(), (d / "lbl4.idx").string()));
    CHECK_THROWS(load_mnist((d / "missing.idx").string(), (d / "lbl3.idx").string()));
}

TEST_CASE("load_cifar10: record layout and multi-file concatenation") {
    const fs::path d = tmpdir();
    write_cifar_batch(d / "b1.bin", 4);
    write_cifar_batch(d / "b2.bin", 3);
    Dataset ds = load_cifar10({(d / "b1.bin").string(), (d / "b2.bin").string()});
    CHECK(ds.images.n == 7);
    CHECK(ds.images.c == 3);
    CHECK(ds.images.h == 32);
    CHECK(ds.images.w == 32);
    CHECK(ds.labels[0] == 0);
    CHECK(ds.labels[4] == 0);  // first record of second file
    // pixel (c=1, p=5) of image 2: (2*7 + 11 + 5) % 256 = 30
    CHECK(ds.images.at(2, 1, 0, 5) == doctest::Approx(30.0f / 255.0f));
}

TEST_CASE("load_cifar10: truncated file rejected") {
    const fs::path d = tmpdir();
    write_cifar_batch(d / "b3.bin", 2);
    fs::resize_file(d / "b3.bin", 3073 + 100);
    CHECK_THROWS(load_cifar10({(d / "b3.bin").string()}));
}

TEST_CASE("normalize: computes stats, standardizes, refuses double application") {
    const fs::path d = tmpdir();
    write_cifar_batch(d / "b4.bin", 8);
    Dataset ds = load_cifar10({(d / "b4.bin").string()});
    normalize(ds);
    CHECK(ds.normalized);
    REQUIRE(ds.mean.size() == 3);
    for (int c = 0; c < 3; ++c) {
        double m = 0;
        for (int b = 0; b < 8; ++b)
            for (int y = 0; y < 32; ++y)
                for (int x = 0; x < 32; ++x) m += ds.images.at(b, c, y, x);
        m /= 8.0 * 32 * 32;
        CHECK(std::fabs(m) < 1e-4);
    }
    CHECK_THROWS_AS(normalize(ds), std::logic_error);
}

TEST_CASE("normalize: supplied training stats applied verbatim to a test split") {
    const fs::path d = tmpdir();
    write_cifar_batch(d / "b5.bin", 6);
    Dataset test = load_cifar10({(d / "b5.bin").string()});
    const std::vector<float> mean = {0.5f, 0.5f, 0.5f}, sd = {0.25f, 0.25f, 0.25f};
    const float before = test.images.v[0];
    normalize(test, &mean, &sd);
    CHECK(test.images.v[0] == doctest::Approx((before - 0.5f) / 0.25f));
    CHECK(test.mean == mean);
}

TEST_CASE("augment: no flags is the identity") {
    Tensor t(2, 3, 8, 8);
    std::mt19937 rng(1);
    std::uniform_real_distribution<float> dis(0.0f, 1.0f);
    for (auto& v : t.v) v = dis(rng);
    const std::vector<float> before = t.v;
    AugmentFlags flags;
    std::mt19937_64 arng(2);
    augment(t, flags, arng);
    CHECK(t.v == before);
}

TEST_CASE("augment: hflip preserves the multiset of pixels") {
    Tensor t(4, 1, 6, 6);
    std::mt19937 rng(3);
    std::uniform_real_distribution<float> dis(0.0f, 1.0f);
    for (auto& v : t.v) v = dis(rng);
    std::vector<float> sorted_before = t.v;
    AugmentFlags flags;
    flags.hflip = true;
    std::mt19937_64 arng(4);
    augment(t, flags, arng);
    std::vector<float> sorted_after = t.v;
    std::sort(sorted_before.begin(), sorted_before.end());
    std::sort(sorted_after.begin(), sorted_after.end());
    CHECK(sorted_before == sorted_after);
}

TEST_CASE("augment: crop keeps shape") {
    Tensor t(2, 3, 32, 32);
    std::mt19937 rng(5);
    std::uniform_real_distribution<float> dis(0.0f, 1.0f);
    for (auto& v : t.v) v = dis(rng);
    AugmentFlags flags;
    flags.crop_pad = 4;
    std::mt19937_64 arng(6);
    augment(t, flags, arng);
    CHECK(t.n == 2);
    CHECK(t.h == 32);
    CHECK(t.w == 32);
    CHECK(t.all_finite());
}

TEST_CASE("BatchIterator: 25 items at batch 10 -> sizes 10,10,5") {
    Dataset ds;
    ds.images = Tensor(25, 1, 4, 4);
    ds.labels.resize(25);
    for (int i = 0; i < 25; ++i) {
        ds.labels[i] = i;
        ds.images.at(i, 0, 0, 0) = static_cast<float>(i);
    }
    BatchIterator it(ds, 10, 7);
    CHECK(it.batches_total() == 3);
    Tensor batch;
    std::vector<int> labels;
    std::vector<int> sizes;
    std::vector<int> seen;
    while (it.next(batch, labels)) {
        sizes.push_back(batch.n);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            CHECK(batch.at(static_cast<int>(i), 0, 0, 0) ==
                  doctest::Approx(static_cast<float>(labels[i])));
            seen.push_back(labels[i]);
        }
    }
    CHECK(sizes == std::vector<int>{10, 10, 5});
    std::sort(seen.begin(), seen.end());
    std::vector<int> all(25);
    std::iota(all.begin(), all.end(), 0);
    CHECK(seen == all);
}

TEST_CASE("BatchIterator: same seed same order, different seed different order") {
    Dataset ds;
    ds.images = Tensor(40, 1, 2, 2);
    ds.labels.resize(40);
    for (int i = 0; i < 40; ++i) ds.labels[i] = i;
    auto first_batch = [&](std::uint64_t seed) {
        BatchIterator it(ds, 40, seed);
        Tensor b;
        std::vector<int> l;
        it.next(b, l);
        return l;
    };
    CHECK(first_batch(11) == first_batch(11));
    CHECK(first_batch(11) != first_batch(12));
}

TEST_CASE("BatchIterator: reset reshuffles deterministically") {
    Dataset ds;
    ds.images = Tensor(30, 1, 2, 2);
    ds.labels.resize(30);
    for (int i = 0; i < 30; ++i) ds.labels[i] = i;
    BatchIterator it(ds, 30, 1);
    Tensor b;
    std::vector<int> epoch0, epoch1, epoch1b;
    it.next(b, epoch0);
    it.reset(2);
    it.next(b, epoch1);
    it.reset(2);
    it.next(b, epoch1b);
    CHECK(epoch1 == epoch1b);
    CHECK(epoch0 != epoch1);
}

TEST_CASE("subset_images picks the right rows") {
    Dataset ds;
    ds.images = Tensor(6, 2, 3, 3);
    for (int i = 0; i < 6; ++i) ds.images.at(i, 0, 0, 0) = static_cast<float>(i * 10);
    Tensor sub = subset_images(ds, {4, 1});
    CHECK(sub.n == 2);
    CHECK(sub.at(0, 0, 0, 0) == 40.0f);
    CHECK(sub.at(1, 0, 0, 0) == 10.0f);
}
