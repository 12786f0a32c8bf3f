// hebbnet command line: train / eval / analyze / bench.
//
// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numeric error,
// 5 i/o error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hebbnet/analysis.hpp"
#include "hebbnet/checkpoint.hpp"
#include "hebbnet/data.hpp"
#include "hebbnet/network.hpp"
#include "hebbnet/plasticity.hpp"
#include "hebbnet/training.hpp"

extern "C" void openblas_set_num_threads(int);

using namespace hebbnet;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string dataset;  // mnist | cifar10
    std::string data_dir;
    std::string output_dir = "run";
    std::string preset;
    bool fully_connected = false;
    int first_width = 96;
    int width_factor = 4;
    int layers = -1;  // cap; -1 = full stack
    std::string mode = "soft_anti";
    float inv_temp = -1.0f;   // layer-1 override; < 0 keeps defaults
    float base_lr = -1.0f;    // layer-1 override
    std::uint64_t seed = 0;
    int unsup_epochs = 1;
    int unsup_batch = 10;
    long max_iterations = -1;
    std::string lr_scheme = "adaptive";
    bool simultaneous = false;
    int sup_epochs = 50;
    int sup_batch = 64;
    float sup_lr = 0.001f;
    float dropout = 0.5f;
    int threads = 1;
    bool deterministic = false;
    bool probe_layers = false;
};

std::string default_data_dir() {
    const char* env = std::getenv("HEBBNET_DATA_DIR");
    return env ? env : "data";
}

void apply_preset(RunConfig& cfg) {
    if (cfg.preset.empty()) return;
    if (cfg.preset == "table-a2-mnist") {
        cfg.dataset = "mnist";
        cfg.first_width = 96;
        cfg.width_factor = 4;
        cfg.fully_connected = false;
    } else if (cfg.preset == "table-a2-cifar") {
        cfg.dataset = "cifar10";
        cfg.first_width = 96;
        cfg.width_factor = 4;
        cfg.fully_connected = false;
    } else if (cfg.preset == "fc-mnist-2000") {
        cfg.dataset = "mnist";
        cfg.first_width = 2000;
        cfg.fully_connected = true;
    } else {
        throw ConfigError("unknown preset: " + cfg.preset);
    }
}

json config_to_json(const RunConfig& c) {
    return json{{"dataset", c.dataset},
                {"data_dir", c.data_dir},
                {"output_dir", c.output_dir},
                {"preset", c.preset},
                {"fully_connected", c.fully_connected},
                {"first_width", c.first_width},
                {"width_factor", c.width_factor},
                {"layers", c.layers},
                {"mode", c.mode},
                {"inv_temp", c.inv_temp},
                {"base_lr", c.base_lr},
                {"seed", c.seed},
                {"unsup_epochs", c.unsup_epochs},
                {"unsup_batch", c.unsup_batch},
                {"max_iterations", c.max_iterations},
                {"lr_scheme", c.lr_scheme},
                {"simultaneous", c.simultaneous},
                {"sup_epochs", c.sup_epochs},
                {"sup_batch", c.sup_batch},
                {"sup_lr", c.sup_lr},
                {"dropout", c.dropout},
                {"threads", c.threads},
                {"deterministic", c.deterministic},
                {"probe_layers", c.probe_layers}};
}

void config_from_json(const json& j, RunConfig& c) {
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("dataset", c.dataset);
    get("data_dir", c.data_dir);
    get("output_dir", c.output_dir);
    get("preset", c.preset);
    get("fully_connected", c.fully_connected);
    get("first_width", c.first_width);
    get("width_factor", c.width_factor);
    get("layers", c.layers);
    get("mode", c.mode);
    get("inv_temp", c.inv_temp);
    get("base_lr", c.base_lr);
    get("seed", c.seed);
    get("unsup_epochs", c.unsup_epochs);
    get("unsup_batch", c.unsup_batch);
    get("max_iterations", c.max_iterations);
    get("lr_scheme", c.lr_scheme);
    get("simultaneous", c.simultaneous);
    get("sup_epochs", c.sup_epochs);
    get("sup_batch", c.sup_batch);
    get("sup_lr", c.sup_lr);
    get("dropout", c.dropout);
    get("threads", c.threads);
    get("deterministic", c.deterministic);
    get("probe_layers", c.probe_layers);
}

PlasticityMode parse_mode(const std::string& s) {
    if (s == "soft") return PlasticityMode::soft_hebbian;
    if (s == "soft_anti") return PlasticityMode::soft_anti_hebbian;
    if (s == "hard") return PlasticityMode::hard_wta;
    throw ConfigError("unknown plasticity mode: " + s);
}

std::string find_file(const std::vector<std::string>& candidates) {
    for (const auto& c : candidates)
        if (fs::exists(c)) return c;
    return {};
}

Dataset load_split(const RunConfig& cfg, bool train_split) {
    const std::string root = cfg.data_dir;
    try {
        if (cfg.dataset == "mnist") {
            auto probe = [&](const std::string& stem) {
                std::vector<std::string> c;
                for (const std::string& dir : {root + "/mnist/", root + "/"})
                    for (const std::string& ext : {"", ".gz"}) c.push_back(dir + stem + ext);
                const std::string f = find_file(c);
                if (f.empty()) throw DataError("MNIST file not found: " + stem + " under " + root);
                return f;
            };
            if (train_split)
                return load_mnist(probe("train-images-idx3-ubyte"),
                                  probe("train-labels-idx1-ubyte"));
            return load_mnist(probe("t10k-images-idx3-ubyte"), probe("t10k-labels-idx1-ubyte"));
        }
        if (cfg.dataset == "cifar10") {
            std::vector<std::string> files;
            if (train_split) {
                for (int i = 1; i <= 5; ++i) {
                    const std::string stem = "data_batch_" + std::to_string(i) + ".bin";
                    const std::string f =
                        find_file({root + "/cifar-10-batches-bin/" + stem, root + "/" + stem});
                    if (f.empty())
                        throw DataError("CIFAR-10 file not found: " + stem + " under " + root);
                    files.push_back(f);
                }
            } else {
                const std::string f = find_file(
                    {root + "/cifar-10-batches-bin/test_batch.bin", root + "/test_batch.bin"});
                if (f.empty()) throw DataError("CIFAR-10 test_batch.bin not found under " + root);
                files.push_back(f);
            }
            return load_cifar10(files);
        }
    } catch (const DataError&) {
        throw;
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
    throw ConfigError("unknown dataset: " + cfg.dataset + " (expected mnist or cifar10)");
}

ArchitectureSpec build_from_config(const RunConfig& cfg, int input_res, int input_channels) {
    ArchitectureSpec arch;
    if (cfg.fully_connected) {
        arch = build_fully_connected(input_res, input_channels, cfg.first_width);
    } else {
        arch = build_architecture(input_res, input_channels, cfg.first_width, cfg.width_factor);
    }
    if (cfg.layers > 0 && cfg.layers < static_cast<int>(arch.layers.size()))
        arch.layers.resize(cfg.layers);
    const PlasticityMode mode = parse_mode(cfg.mode);
    for (auto& l : arch.layers) l.plasticity.mode = mode;
    if (cfg.inv_temp > 0) arch.layers[0].plasticity.inv_temp = cfg.inv_temp;
    if (cfg.base_lr > 0) arch.layers[0].plasticity.base_lr = cfg.base_lr;
    return arch;
}

std::uint32_t model_content_hash(const Model& model) {
    std::uint32_t h = 0;
    for (const auto& l : model.layers) {
        h ^= crc32(l.bank.weights.data(), l.bank.weights.size() * sizeof(float));
        h ^= crc32(l.bn.running_mean.data(), l.bn.running_mean.size() * sizeof(float)) << 1;
    }
    return h;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    f << j.dump(2) << "\n";
    if (!f) throw IoError("write failed: " + path.string());
}

json read_json(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read " + path.string());
    try {
        return json::parse(f);
    } catch (const std::exception& e) {
        throw ConfigError("bad JSON in " + path.string() + ": " + e.what());
    }
}

void save_head(const ClassifierHead& head, const fs::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    const std::int32_t meta[2] = {head.num_classes, head.dim};
    f.write(reinterpret_cast<const char*>(meta), sizeof meta);
    f.write(reinterpret_cast<const char*>(head.weights.data()),
            static_cast<std::streamsize>(head.weights.size() * sizeof(float)));
    f.write(reinterpret_cast<const char*>(head.bias.data()),
            static_cast<std::streamsize>(head.bias.size() * sizeof(float)));
    if (!f) throw IoError("write failed: " + path.string());
}

std::optional<ClassifierHead> load_head(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return std::nullopt;
    std::int32_t meta[2];
    f.read(reinterpret_cast<char*>(meta), sizeof meta);
    ClassifierHead head = make_head(meta[0], meta[1], 0.0f, 0);
    f.read(reinterpret_cast<char*>(head.weights.data()),
           static_cast<std::streamsize>(head.weights.size() * sizeof(float)));
    f.read(reinterpret_cast<char*>(head.bias.data()),
           static_cast<std::streamsize>(head.bias.size() * sizeof(float)));
    if (!f) throw IoError("truncated head file: " + path.string());
    return head;
}

// ---- train ----------------------------------------------------------------

int cmd_train(RunConfig cfg) {
    Dataset train = load_split(cfg, true);
    Dataset test = load_split(cfg, false);
    normalize(train);
    normalize(test, &train.mean, &train.stddev);

    ArchitectureSpec arch = build_from_config(cfg, train.images.h, train.images.c);
    Model model = make_model(arch, cfg.seed);
    model.data_mean = train.mean;
    model.data_std = train.stddev;

    fs::create_directories(cfg.output_dir);
    const fs::path out(cfg.output_dir);
    MetricsWriter metrics((out / "metrics.csv").string());

    UnsupervisedRunConfig ucfg;
    ucfg.epochs = cfg.unsup_epochs;
    ucfg.batch_size = cfg.unsup_batch;
    ucfg.max_iterations = cfg.max_iterations;
    ucfg.simultaneous = cfg.simultaneous;
    ucfg.seed = cfg.seed;
    ucfg.lr_scheme =
        cfg.lr_scheme == "linear" ? UnsupLrScheme::linear_decay : UnsupLrScheme::adaptive;
    train_unsupervised(model, train, ucfg, &metrics);

    SupervisedRunConfig scfg;
    scfg.epochs = cfg.sup_epochs;
    scfg.batch_size = cfg.sup_batch;
    scfg.initial_lr = cfg.sup_lr;
    scfg.dropout = cfg.dropout;
    scfg.seed = cfg.seed;

    json results;
    const int last = static_cast<int>(model.layers.size()) - 1;
    std::vector<int> probe_set;
    if (cfg.probe_layers)
        for (int l = 0; l <= last; ++l) probe_set.push_back(l);
    else
        probe_set.push_back(last);

    SupervisedResult final_head;
    for (int l : probe_set) {
        FeatureMatrix ftr = extract_features(model, train, l);
        SupervisedResult res = train_classifier(ftr, train.labels, train.num_classes, scfg,
                                                l == last ? &metrics : nullptr);
        FeatureMatrix fte = extract_features(model, test, l);
        const float acc = evaluate(res.head, fte, test.labels, test.num_classes).accuracy;
        results["layer_accuracy"][std::to_string(l + 1)] = acc;
        if (l == last) {
            results["test_accuracy"] = acc;
            results["train_accuracy"] = res.final_train_acc;
            results["val_accuracy"] = res.final_val_acc;
            final_head = res;
        }
    }

    const fs::path ckpt = out / "checkpoint";
    save_checkpoint(model, ckpt.string());
    save_head(final_head.head, ckpt / "head.bin");

    R1Report r1 = count_r1(model);
    for (std::size_t l = 0; l < r1.fraction.size(); ++l)
        results["r1_fraction"][std::to_string(l + 1)] = r1.fraction[l];

    json manifest;
    manifest["config"] = config_to_json(cfg);
    manifest["seed"] = cfg.seed;
    manifest["content_hash"] = model_content_hash(model);
    std::vector<int> widths;
    for (const auto& l : arch.layers) widths.push_back(l.out_channels);
    manifest["widths"] = widths;
    write_json(out / "manifest.json", manifest);
    write_json(out / "results.json", results);

    std::cout << "test_accuracy " << std::fixed << std::setprecision(4)
              << results["test_accuracy"].get<float>() << "\n";
    return 0;
}

// ---- eval -----------------------------------------------------------------

int cmd_eval(const std::string& checkpoint, RunConfig cfg, const std::string& split) {
    Model model = load_checkpoint(checkpoint);
    Dataset ds = load_split(cfg, split == "train");
    if (ds.images.c != model.arch.input_channels || ds.images.h != model.arch.input_res)
        throw ConfigError("checkpoint/dataset shape mismatch");
    normalize(ds, model.data_mean.empty() ? nullptr : &model.data_mean,
              model.data_std.empty() ? nullptr : &model.data_std);

    const int last = static_cast<int>(model.layers.size()) - 1;
    FeatureMatrix f = extract_features(model, ds, last);
    std::optional<ClassifierHead> head = load_head(fs::path(checkpoint) / "head.bin");
    if (!head) head = make_head(ds.num_classes, f.dim, 0.0f, 0);  // chance-level head
    if (head->dim != f.dim) throw ConfigError("head/feature dimension mismatch");
    EvalResult ev = evaluate(*head, f, ds.labels, ds.num_classes);

    std::cout << std::fixed << std::setprecision(4) << ev.accuracy << "\n";
    json results;
    results["accuracy"] = ev.accuracy;
    results["split"] = split;
    for (std::size_t c = 0; c < ev.per_class.size(); ++c)
        results["per_class"][std::to_string(c)] = ev.per_class[c];
    fs::create_directories(cfg.output_dir);
    write_json(fs::path(cfg.output_dir) / "results.json", results);
    return 0;
}

// ---- analyze --------------------------------------------------------------

int cmd_analyze(const std::string& checkpoint, RunConfig cfg, const std::string& task,
                int layer, const std::string& neurons, int top_k) {
    Model model = load_checkpoint(checkpoint);
    fs::create_directories(cfg.output_dir);
    const fs::path out(cfg.output_dir);
    const int nlayers = static_cast<int>(model.layers.size());
    if (layer < 1 || layer > nlayers)
        throw ConfigError("--layer out of range (1.." + std::to_string(nlayers) + ")");
    const int li = layer - 1;

    if (task == "r1") {
        R1Report rep = count_r1(model);
        std::ofstream f(out / "r1.csv");
        if (!f) throw IoError("cannot write r1.csv");
        f << "layer,mean_radius,r1_fraction\n";
        for (std::size_t l = 0; l < rep.fraction.size(); ++l)
            f << l + 1 << "," << model.layers[l].bank.mean_radius() << "," << rep.fraction[l]
              << "\n";
        std::cout << "wrote " << (out / "r1.csv").string() << "\n";
        return 0;
    }
    if (task == "rf") {
        int count = model.layers[li].bank.num_neurons;
        if (neurons != "all") count = std::min(count, std::stoi(neurons));
        std::vector<Tensor> images;
        for (int n = 0; n < count; ++n) {
            PgdOptions opts;
            opts.seed = cfg.seed + n;
            images.push_back(receptive_field_pgd(model, li, n, opts).image);
        }
        const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))));
        const std::string path = (out / ("rf_layer" + std::to_string(layer) + ".ppm")).string();
        export_image_grid(images, cols, path);
        std::cout << "wrote " << path << "\n";
        return 0;
    }
    if (task == "patches") {
        Dataset ds = load_split(cfg, true);
        normalize(ds, model.data_mean.empty() ? nullptr : &model.data_mean,
                  model.data_std.empty() ? nullptr : &model.data_std);
        int count = model.layers[li].bank.num_neurons;
        if (neurons != "all") count = std::min(count, std::stoi(neurons));
        std::ofstream f(out / "patches.csv");
        if (!f) throw IoError("cannot write patches.csv");
        f << "neuron,rank,image_index,y0,x0,y1,x1,activation\n";
        for (int n = 0; n < count; ++n) {
            const auto hits = top_activating_patches(model, ds, li, n, top_k);
            for (std::size_t r = 0; r < hits.size(); ++r)
                f << n << "," << r << "," << hits[r].image_index << "," << hits[r].y0 << ","
                  << hits[r].x0 << "," << hits[r].y1 << "," << hits[r].x1 << ","
                  << hits[r].activation << "\n";
        }
        std::cout << "wrote " << (out / "patches.csv").string() << "\n";
        return 0;
    }
    if (task == "export-features") {
        Dataset ds = load_split(cfg, false);
        normalize(ds, model.data_mean.empty() ? nullptr : &model.data_mean,
                  model.data_std.empty() ? nullptr : &model.data_std);
        FeatureMatrix f = extract_features(model, ds, li);
        std::ofstream csv(out / "features.csv");
        if (!csv) throw IoError("cannot write features.csv");
        for (long i = 0; i < f.n; ++i) {
            if (!ds.labels.empty()) csv << ds.labels[i];
            for (int j = 0; j < f.dim; ++j) csv << "," << f.row(i)[j];
            csv << "\n";
        }
        std::cout << "wrote " << (out / "features.csv").string() << "\n";
        return 0;
    }
    throw ConfigError("unknown analyze task: " + task);
}

// ---- bench ----------------------------------------------------------------

int cmd_bench(RunConfig cfg, int num_seeds, int subset) {
    cfg.dataset = "cifar10";
    Dataset train = load_split(cfg, true);
    Dataset test = load_split(cfg, false);
    if (subset > 0 && subset < train.images.n) {
        std::vector<int> idx(subset);
        std::iota(idx.begin(), idx.end(), 0);
        Dataset sub;
        sub.images = subset_images(train, idx);
        sub.labels.assign(train.labels.begin(), train.labels.begin() + subset);
        sub.num_classes = train.num_classes;
        train = std::move(sub);
    }
    normalize(train);
    normalize(test, &train.mean, &train.stddev);

    struct Row {
        std::string variant;
        std::uint64_t seed;
        float accuracy, r1;
    };
    std::vector<Row> rows;
    for (int s = 0; s < num_seeds; ++s) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
        for (const std::string& variant : {"softhebb", "hard_wta", "random"}) {
            ArchitectureSpec arch = build_architecture(32, 3, cfg.first_width, 4);
            arch.layers.resize(1);
            arch.layers[0].plasticity.inv_temp = cfg.inv_temp > 0 ? cfg.inv_temp : 1.0f;
            arch.layers[0].plasticity.mode = variant == "hard_wta"
                                                 ? PlasticityMode::hard_wta
                                                 : PlasticityMode::soft_anti_hebbian;
            Model model = make_model(arch, seed);
            if (variant == "random") {
                BatchIterator it(train, 64, seed);
                Tensor images;
                std::vector<int> labels;
                for (int b = 0; b < 100 && it.next(images, labels); ++b)
                    forward(model, images, 0, Mode::train);
            } else {
                UnsupervisedRunConfig ucfg;
                ucfg.seed = seed;
                ucfg.max_iterations = cfg.max_iterations;
                train_unsupervised(model, train, ucfg);
            }
            FeatureMatrix ftr = extract_features(model, train, 0);
            SupervisedRunConfig scfg;
            scfg.epochs = cfg.sup_epochs;
            scfg.seed = seed;
            SupervisedResult res =
                train_classifier(ftr, train.labels, train.num_classes, scfg);
            FeatureMatrix fte = extract_features(model, test, 0);
            const float acc = evaluate(res.head, fte, test.labels, test.num_classes).accuracy;
            rows.push_back({variant, seed, acc, count_r1(model).fraction[0]});
        }
    }

    fs::create_directories(cfg.output_dir);
    std::ofstream csv(fs::path(cfg.output_dir) / "bench.csv");
    if (!csv) throw IoError("cannot write bench.csv");
    csv << "variant,seed,accuracy,r1_fraction\n";
    std::cout << "variant,seed,accuracy,r1_fraction\n";
    for (const Row& r : rows) {
        csv << r.variant << "," << r.seed << "," << r.accuracy << "," << r.r1 << "\n";
        std::cout << r.variant << "," << r.seed << "," << std::fixed << std::setprecision(4)
                  << r.accuracy << "," << r.r1 << "\n";
    }
    for (const std::string& variant : {"softhebb", "hard_wta", "random"}) {
        double sum = 0, sq = 0;
        int n = 0;
        for (const Row& r : rows)
            if (r.variant == variant) {
                sum += r.accuracy;
                sq += static_cast<double>(r.accuracy) * r.accuracy;
                ++n;
            }
        const double mean = sum / n;
        const double sd = n > 1 ? std::sqrt(std::max(0.0, (sq - n * mean * mean) / (n - 1))) : 0;
        std::cout << variant << " mean " << std::fixed << std::setprecision(4) << mean << " +- "
                  << sd << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SoftHebb training, evaluation, and analysis"};
    app.require_subcommand(1);

    RunConfig cfg;
    cfg.data_dir = default_data_dir();
    std::string config_path, checkpoint, split = "test", task, neurons = "16";
    int layer = 1, top_k = 9, num_seeds = 1, subset = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file (flags override it)");
        sub->add_option("--dataset", cfg.dataset, "mnist or cifar10");
        sub->add_option("--data-dir", cfg.data_dir, "dataset root (default $HEBBNET_DATA_DIR)");
        sub->add_option("--out", cfg.output_dir, "output directory");
        sub->add_option("--seed", cfg.seed, "RNG seed");
        sub->add_option("--threads", cfg.threads, "BLAS thread count");
        sub->add_flag("--deterministic", cfg.deterministic,
                      "single-stream RNG and ordered reductions");
    };

    CLI::App* train = app.add_subcommand("train", "unsupervised pass + linear head");
    add_common(train);
    train->add_option("--preset", cfg.preset,
                      "table-a2-mnist | table-a2-cifar | fc-mnist-2000");
    train->add_option("--first-width", cfg.first_width, "layer-1 neuron count");
    train->add_option("--width-factor", cfg.width_factor, "width multiplier per layer");
    train->add_option("--layers", cfg.layers, "cap on layer count");
    train->add_option("--mode", cfg.mode, "soft | soft_anti | hard");
    train->add_option("--inv-temp", cfg.inv_temp, "layer-1 1/tau override");
    train->add_option("--base-lr", cfg.base_lr, "layer-1 base learning rate override");
    train->add_option("--unsup-epochs", cfg.unsup_epochs, "unsupervised epochs");
    train->add_option("--unsup-batch", cfg.unsup_batch, "unsupervised batch size");
    train->add_option("--max-iterations", cfg.max_iterations, "per-layer update cap");
    train->add_option("--lr-scheme", cfg.lr_scheme, "adaptive | linear");
    train->add_flag("--simultaneous", cfg.simultaneous, "train all layers in one pass");
    train->add_option("--sup-epochs", cfg.sup_epochs, "classifier epochs");
    train->add_option("--sup-batch", cfg.sup_batch, "classifier batch size");
    train->add_option("--sup-lr", cfg.sup_lr, "classifier initial learning rate");
    train->add_option("--dropout", cfg.dropout, "classifier dropout");
    train->add_flag("--probe-layers", cfg.probe_layers, "linear probe at every depth");
    train->add_flag("--fc", cfg.fully_connected, "single fully connected hidden layer");

    CLI::App* evalc = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(evalc);
    evalc->add_option("checkpoint", checkpoint, "checkpoint directory")->required();
    evalc->add_option("--split", split, "train or test");

    CLI::App* analyze = app.add_subcommand("analyze", "emit analysis artifacts");
    add_common(analyze);
    analyze->add_option("task", task, "r1 | rf | patches | export-features")->required();
    analyze->add_option("checkpoint", checkpoint, "checkpoint directory")->required();
    analyze->add_option("--layer", layer, "1-based layer index");
    analyze->add_option("--neurons", neurons, "neuron count or 'all'");
    analyze->add_option("--top-k", top_k, "patches per neuron");

    CLI::App* bench = app.add_subcommand("bench", "softhebb vs hard-WTA vs random");
    add_common(bench);
    bench->add_option("--first-width", cfg.first_width, "layer-1 neuron count");
    bench->add_option("--inv-temp", cfg.inv_temp, "1/tau");
    bench->add_option("--seeds", num_seeds, "number of seeds");
    bench->add_option("--subset", subset, "cap on training images (0 = all)");
    bench->add_option("--max-iterations", cfg.max_iterations, "per-layer update cap");
    bench->add_option("--sup-epochs", cfg.sup_epochs, "classifier epochs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 2 : 0;
    }

    try {
        if (!config_path.empty()) {
            RunConfig file_cfg;
            file_cfg.data_dir = default_data_dir();
            config_from_json(read_json(config_path), file_cfg);
            // flags win: re-parse over the file-loaded config
            cfg = file_cfg;
            app.clear();
            app.parse(argc, argv);
        }
        apply_preset(cfg);
        if (cfg.deterministic) cfg.threads = 1;
        openblas_set_num_threads(std::max(1, cfg.threads));

        if (*train) return cmd_train(cfg);
        if (*evalc) return cmd_eval(checkpoint, cfg, split);
        if (*analyze) return cmd_analyze(checkpoint, cfg, task, layer, neurons, top_k);
        if (*bench) return cmd_bench(cfg, num_seeds, subset);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 5;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        if (msg.find("finite") != std::string::npos || msg.find("NaN") != std::string::npos) {
            std::cerr << "numeric error: " << msg << "\n";
            return 4;
        }
        std::cerr << "error: " << msg << "\n";
        return 5;
    }
}
