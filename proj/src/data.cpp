#include "hebbnet/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hebbnet {

namespace {

// Reads a whole file, transparently inflating gzip (gzread passes plain
// files through unchanged).
std::vector<std::uint8_t> read_file(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("cannot open " + path);
    std::vector<std::uint8_t> out;
    std::uint8_t buf[1 << 16];
    int n;
    while ((n = gzread(f, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + n);
    const bool err = n < 0;
    gzclose(f);
    if (err) throw std::runtime_error("read error on " + path);
    return out;
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t off) {
    if (off + 4 > b.size())
        throw std::runtime_error("IDX header truncated at offset " + std::to_string(off));
    return (static_cast<std::uint32_t>(b[off]) << 24) | (b[off + 1] << 16) |
           (b[off + 2] << 8) | b[off + 3];
}

}  // namespace

Dataset load_mnist(const std::string& images_path, const std::string& labels_path) {
    const auto img = read_file(images_path);
    const auto lab = read_file(labels_path);

    if (be32(img, 0) != 0x00000803u) {
        std::ostringstream os;
        os << "IDX image magic mismatch at offset 0 in " << images_path << " (got 0x"
           << std::hex << be32(img, 0) << ", want 0x803)";
        throw std::runtime_error(os.str());
    }
    if (be32(lab, 0) != 0x00000801u)
        throw std::runtime_error("IDX label magic mismatch at offset 0 in " + labels_path);

    const int n = static_cast<int>(be32(img, 4));
    const int h = static_cast<int>(be32(img, 8));
    const int w = static_cast<int>(be32(img, 12));
    if (static_cast<int>(be32(lab, 4)) != n)
        throw std::runtime_error("IDX image/label count mismatch");
    if (img.size() != 16 + static_cast<std::size_t>(n) * h * w)
        throw std::runtime_error("IDX image payload size mismatch in " + images_path);
    if (lab.size() != 8 + static_cast<std::size_t>(n))
        throw std::runtime_error("IDX label payload size mismatch in " + labels_path);

    Dataset ds;
    ds.images = Tensor(n, 1, h, w);
    ds.labels.resize(n);
    ds.num_classes = 10;
    for (std::size_t i = 0; i < static_cast<std::size_t>(n) * h * w; ++i)
        ds.images.v[i] = static_cast<float>(img[16 + i]) / 255.0f;
    for (int i = 0; i < n; ++i) {
        const int y = lab[8 + i];
        if (y < 0 || y > 9) throw std::runtime_error("IDX label out of range");
        ds.labels[i] = y;
    }
    return ds;
}

Dataset load_cifar10(const std::vector<std::string>& batch_files) {
    constexpr std::size_t kRecord = 3073;  // 1 label byte + 3*32*32 pixels
    std::vector<std::uint8_t> all;
    for (const auto& path : batch_files) {
        auto b = read_file(path);
        if (b.size() % kRecord != 0)
            throw std::runtime_error("CIFAR-10 file length not a multiple of 3073: " + path);
        all.insert(all.end(), b.begin(), b.end());
    }
    const int n = static_cast<int>(all.size() / kRecord);
    Dataset ds;
    ds.images = Tensor(n, 3, 32, 32);
    ds.labels.resize(n);
    ds.num_classes = 10;
    for (int i = 0; i < n; ++i) {
        const std::uint8_t* rec = all.data() + static_cast<std::size_t>(i) * kRecord;
        const int y = rec[0];
        if (y > 9) throw std::runtime_error("CIFAR-10 label out of range");
        ds.labels[i] = y;
        float* dst = ds.images.image(i);
        for (std::size_t p = 0; p < 3072; ++p)
            dst[p] = static_cast<float>(rec[1 + p]) / 255.0f;
    }
    return ds;
}

void normalize(Dataset& ds, const std::vector<float>* mean, const std::vector<float>* stddev) {
    if (ds.normalized)
        throw std::logic_error("normalize: dataset already normalized");
    const int c = ds.images.c;
    const long per = static_cast<long>(ds.images.n) * ds.images.h * ds.images.w;

    std::vector<float> mu(c), sd(c);
    if (mean && stddev) {
        mu = *mean;
        sd = *stddev;
    } else {
        for (int ch = 0; ch < c; ++ch) {
            double s = 0.0;
            for (int b = 0; b < ds.images.n; ++b) {
                const float* p = ds.images.image(b) +
                                 static_cast<std::size_t>(ch) * ds.images.h * ds.images.w;
                for (long i = 0; i < static_cast<long>(ds.images.h) * ds.images.w; ++i)
                    s += p[i];
            }
            mu[ch] = static_cast<float>(s / per);
            double sq = 0.0;
            for (int b = 0; b < ds.images.n; ++b) {
                const float* p = ds.images.image(b) +
                                 static_cast<std::size_t>(ch) * ds.images.h * ds.images.w;
                for (long i = 0; i < static_cast<long>(ds.images.h) * ds.images.w; ++i) {
                    const double d = p[i] - mu[ch];
                    sq += d * d;
                }
            }
            sd[ch] = static_cast<float>(std::sqrt(sq / per));
        }
    }
    const long plane = static_cast<long>(ds.images.h) * ds.images.w;
    for (int ch = 0; ch < c; ++ch) {
        const float s = sd[ch] > 1e-8f ? sd[ch] : 1e-8f;
        for (int b = 0; b < ds.images.n; ++b) {
            float* p = ds.images.image(b) + static_cast<std::size_t>(ch) * plane;
            for (long i = 0; i < plane; ++i) p[i] = (p[i] - mu[ch]) / s;
        }
    }
    ds.mean = mu;
    ds.stddev = sd;
    ds.normalized = true;
}

namespace {

int reflect(int i, int n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
}

}  // namespace

void augment(Tensor& batch, const AugmentFlags& flags, std::mt19937_64& rng) {
    if (!flags.hflip && flags.crop_pad == 0) return;
    std::uniform_int_distribution<int> coin(0, 1);
    for (int b = 0; b < batch.n; ++b) {
        if (flags.hflip && coin(rng) == 1) {
            for (int ch = 0; ch < batch.c; ++ch)
                for (int y = 0; y < batch.h; ++y)
                    for (int x = 0; x < batch.w / 2; ++x)
                        std::swap(batch.at(b, ch, y, x), batch.at(b, ch, y, batch.w - 1 - x));
        }
        if (flags.crop_pad > 0) {
            std::uniform_int_distribution<int> off(0, 2 * flags.crop_pad);
            const int oy = off(rng) - flags.crop_pad;
            const int ox = off(rng) - flags.crop_pad;
            Tensor src(1, batch.c, batch.h, batch.w);
            std::copy(batch.image(b), batch.image(b) + src.size(), src.v.begin());
            for (int ch = 0; ch < batch.c; ++ch)
                for (int y = 0; y < batch.h; ++y)
                    for (int x = 0; x < batch.w; ++x)
                        batch.at(b, ch, y, x) =
                            src.at(0, ch, reflect(y + oy, batch.h), reflect(x + ox, batch.w));
        }
    }
}

BatchIterator::BatchIterator(const Dataset& ds, int batch_size, std::uint64_t shuffle_seed,
                             bool shuffle)
    : ds_(ds), batch_size_(batch_size) {
    if (batch_size < 1) throw std::invalid_argument("batches: batch_size must be >= 1");
    order_.resize(ds.images.n);
    std::iota(order_.begin(), order_.end(), 0);
    if (shuffle) {
        std::mt19937_64 rng(shuffle_seed);
        std::shuffle(order_.begin(), order_.end(), rng);
    }
}

void BatchIterator::reset(std::uint64_t epoch_seed) {
    pos_ = 0;
    // restore identity first so the epoch order depends only on epoch_seed
    std::iota(order_.begin(), order_.end(), 0);
    std::mt19937_64 rng(epoch_seed);
    std::shuffle(order_.begin(), order_.end(), rng);
}

long BatchIterator::batches_total() const {
    return (static_cast<long>(order_.size()) + batch_size_ - 1) / batch_size_;
}

bool BatchIterator::next(Tensor& images, std::vector<int>& labels) {
    if (pos_ >= static_cast<long>(order_.size())) return false;
    const long end = std::min<long>(pos_ + batch_size_, order_.size());
    const int bsz = static_cast<int>(end - pos_);
    images = Tensor(bsz, ds_.images.c, ds_.images.h, ds_.images.w);
    labels.resize(bsz);
    const std::size_t per = static_cast<std::size_t>(ds_.images.c) * ds_.images.h * ds_.images.w;
    for (int i = 0; i < bsz; ++i) {
        const int src = order_[pos_ + i];
        std::copy(ds_.images.image(src), ds_.images.image(src) + per, images.image(i));
        labels[i] = ds_.labels.empty() ? -1 : ds_.labels[src];
    }
    pos_ = end;
    return true;
}

Tensor subset_images(const Dataset& ds, const std::vector<int>& indices) {
    Tensor out(static_cast<int>(indices.size()), ds.images.c, ds.images.h, ds.images.w);
    const std::size_t per = static_cast<std::size_t>(ds.images.c) * ds.images.h * ds.images.w;
    for (std::size_t i = 0; i < indices.size(); ++i)
        std::copy(ds.images.image(indices[i]), ds.images.image(indices[i]) + per,
                  out.image(static_cast<int>(i)));
    return out;
}

}  // namespace hebbnet
