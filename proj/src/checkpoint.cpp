#include "hebbnet/checkpoint.hpp"

#include <zlib.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace hebbnet {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint32_t crc32(const void* data, std::size_t len) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, static_cast<const Bytef*>(data), static_cast<uInt>(len)));
}

namespace {

void write_blob(const fs::path& path, const std::vector<float>& v) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
}

std::vector<float> read_blob(const fs::path& path, std::size_t count,
                             std::uint32_t expected_crc) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw std::runtime_error("checkpoint: cannot read " + path.string());
    const auto bytes = static_cast<std::size_t>(f.tellg());
    if (bytes != count * sizeof(float))
        throw std::runtime_error("checkpoint: " + path.string() + " has " +
                                 std::to_string(bytes) + " bytes, expected " +
                                 std::to_string(count * sizeof(float)));
    f.seekg(0);
    std::vector<float> v(count);
    f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
    if (!f) throw std::runtime_error("checkpoint: short read on " + path.string());
    if (crc32(v.data(), bytes) != expected_crc)
        throw std::runtime_error("checkpoint: checksum mismatch on " + path.string());
    return v;
}

json activation_to_json(const ActivationSpec& a) {
    static const char* names[] = {"repu", "triangle", "softmax_fwd", "relu"};
    return {{"kind", names[static_cast<int>(a.kind)]},
            {"power", a.power},
            {"fwd_inv_temp", a.fwd_inv_temp}};
}

ActivationSpec activation_from_json(const json& j) {
    ActivationSpec a;
    const std::string k = j.at("kind");
    if (k == "repu") a.kind = ActivationSpec::Kind::repu;
    else if (k == "triangle") a.kind = ActivationSpec::Kind::triangle;
    else if (k == "softmax_fwd") a.kind = ActivationSpec::Kind::softmax_fwd;
    else if (k == "relu") a.kind = ActivationSpec::Kind::relu;
    else throw std::runtime_error("checkpoint: unknown activation kind " + k);
    a.power = j.at("power");
    a.fwd_inv_temp = j.at("fwd_inv_temp");
    return a;
}

json layer_spec_to_json(const LayerSpec& s) {
    static const char* pool_names[] = {"none", "max", "avg"};
    static const char* mode_names[] = {"soft_hebbian", "soft_anti_hebbian", "hard_wta"};
    return {{"in_channels", s.in_channels},
            {"out_channels", s.out_channels},
            {"conv_kernel", s.conv_kernel},
            {"conv_padding", s.conv_padding},
            {"pool_type", pool_names[static_cast<int>(s.pool_type)]},
            {"pool_kernel", s.pool_kernel},
            {"pool_stride", s.pool_stride},
            {"pool_padding", s.pool_padding},
            {"activation", activation_to_json(s.activation)},
            {"plasticity",
             {{"inv_temp", s.plasticity.inv_temp},
              {"base_lr", s.plasticity.base_lr},
              {"lr_power", s.plasticity.lr_power},
              {"mode", mode_names[static_cast<int>(s.plasticity.mode)]},
              {"aggregation", s.plasticity.aggregation == Aggregation::mean ? "mean" : "sum"}}},
            {"init",
             {{"family", static_cast<int>(s.init.family)},
              {"target_radius", s.init.target_radius}}}};
}

LayerSpec layer_spec_from_json(const json& j) {
    LayerSpec s;
    s.in_channels = j.at("in_channels");
    s.out_channels = j.at("out_channels");
    s.conv_kernel = j.at("conv_kernel");
    s.conv_padding = j.at("conv_padding");
    const std::string p = j.at("pool_type");
    s.pool_type = p == "none" ? PoolType::none : p == "max" ? PoolType::max : PoolType::avg;
    s.pool_kernel = j.at("pool_kernel");
    s.pool_stride = j.at("pool_stride");
    s.pool_padding = j.at("pool_padding");
    s.activation = activation_from_json(j.at("activation"));
    const json& pl = j.at("plasticity");
    s.plasticity.inv_temp = pl.at("inv_temp");
    s.plasticity.base_lr = pl.at("base_lr");
    s.plasticity.lr_power = pl.at("lr_power");
    const std::string m = pl.at("mode");
    s.plasticity.mode = m == "soft_hebbian"      ? PlasticityMode::soft_hebbian
                        : m == "soft_anti_hebbian" ? PlasticityMode::soft_anti_hebbian
                                                   : PlasticityMode::hard_wta;
    s.plasticity.aggregation =
        pl.at("aggregation") == "sum" ? Aggregation::sum : Aggregation::mean;
    s.init.family = static_cast<InitFamily>(j.at("init").at("family").get<int>());
    s.init.target_radius = j.at("init").at("target_radius");
    return s;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& dir) {
    fs::create_directories(dir);
    json manifest;
    manifest["format_version"] = kCheckpointVersion;
    manifest["seed"] = model.seed;
    manifest["architecture"] = {{"input_res", model.arch.input_res},
                                {"input_channels", model.arch.input_channels},
                                {"first_width", model.arch.first_width},
                                {"width_factor", model.arch.width_factor},
                                {"fully_connected", model.arch.fully_connected}};
    manifest["data_mean"] = model.data_mean;
    manifest["data_std"] = model.data_std;

    json layers = json::array();
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const Layer& layer = model.layers[i];
        const std::string wname = "layer" + std::to_string(i) + ".weights";
        const std::string bname = "layer" + std::to_string(i) + ".bn";
        write_blob(fs::path(dir) / wname, layer.bank.weights);

        std::vector<float> bn = layer.bn.running_mean;
        bn.insert(bn.end(), layer.bn.running_var.begin(), layer.bn.running_var.end());
        write_blob(fs::path(dir) / bname, bn);

        json lj = layer_spec_to_json(layer.spec);
        lj["weights_file"] = wname;
        lj["weights_crc32"] = crc32(layer.bank.weights.data(),
                                    layer.bank.weights.size() * sizeof(float));
        lj["bn_file"] = bname;
        lj["bn_crc32"] = crc32(bn.data(), bn.size() * sizeof(float));
        lj["bn_initialized"] = layer.bn.initialized;
        lj["bn_eps"] = layer.bn.eps;
        lj["bn_momentum"] = layer.bn.momentum;
        layers.push_back(lj);
    }
    manifest["layers"] = layers;

    std::ofstream f(fs::path(dir) / "manifest.json");
    if (!f) throw std::runtime_error("checkpoint: cannot write manifest in " + dir);
    f << manifest.dump(2) << "\n";
}

Model load_checkpoint(const std::string& dir) {
    std::ifstream f(fs::path(dir) / "manifest.json");
    if (!f) throw std::runtime_error("checkpoint: no manifest.json in " + dir);
    json manifest;
    try {
        f >> manifest;
    } catch (const json::exception& e) {
        throw std::runtime_error("checkpoint: malformed manifest: " + std::string(e.what()));
    }
    if (manifest.at("format_version").get<int>() != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported format version");

    Model m;
    m.seed = manifest.at("seed");
    const json& a = manifest.at("architecture");
    m.arch.input_res = a.at("input_res");
    m.arch.input_channels = a.at("input_channels");
    m.arch.first_width = a.at("first_width");
    m.arch.width_factor = a.at("width_factor");
    m.arch.fully_connected = a.at("fully_connected");
    m.data_mean = manifest.at("data_mean").get<std::vector<float>>();
    m.data_std = manifest.at("data_std").get<std::vector<float>>();

    for (const json& lj : manifest.at("layers")) {
        Layer layer;
        layer.spec = layer_spec_from_json(lj);
        m.arch.layers.push_back(layer.spec);

        const std::size_t wcount = static_cast<std::size_t>(layer.spec.out_channels) *
                                   layer.spec.in_channels * layer.spec.conv_kernel *
                                   layer.spec.conv_kernel;
        layer.bank = NeuronBank(layer.spec.out_channels, layer.spec.in_channels,
                                layer.spec.conv_kernel);
        layer.bank.weights = read_blob(fs::path(dir) / lj.at("weights_file").get<std::string>(),
                                       wcount, lj.at("weights_crc32"));
        layer.bank.recompute_radii();

        std::vector<float> bn =
            read_blob(fs::path(dir) / lj.at("bn_file").get<std::string>(),
                      2 * static_cast<std::size_t>(layer.spec.in_channels), lj.at("bn_crc32"));
        layer.bn.running_mean.assign(bn.begin(), bn.begin() + layer.spec.in_channels);
        layer.bn.running_var.assign(bn.begin() + layer.spec.in_channels, bn.end());
        layer.bn.initialized = lj.at("bn_initialized");
        layer.bn.eps = lj.at("bn_eps");
        layer.bn.momentum = lj.at("bn_momentum");
        m.layers.push_back(std::move(layer));
    }
    return m;
}

}  // namespace hebbnet
