#include "fpdn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace fpdn {

namespace {

constexpr char kMagic[4] = {'F', 'P', 'D', 'N'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& out, uint32_t v) {
    const unsigned char bytes[4] = {static_cast<unsigned char>(v & 0xff),
                                    static_cast<unsigned char>((v >> 8) & 0xff),
                                    static_cast<unsigned char>((v >> 16) & 0xff),
                                    static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

uint32_t get_u32(std::istream& in, const std::string& what) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    if (in.gcount() != 4) throw std::runtime_error("truncated file while reading " + what);
    return static_cast<uint32_t>(bytes[0]) | (static_cast<uint32_t>(bytes[1]) << 8) |
           (static_cast<uint32_t>(bytes[2]) << 16) | (static_cast<uint32_t>(bytes[3]) << 24);
}

void put_f32(std::ostream& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

std::string activation_name(UNetConfig::Activation a) {
    return a == UNetConfig::Activation::Sigmoid ? "sigmoid" : "linear";
}

}  // namespace

void save_checkpoint(const UNetParams<float>& params, const std::string& path,
                     std::optional<float> val_mae) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);

    out.write(kMagic, 4);
    put_u32(out, kVersion);

    std::ostringstream cfg;
    cfg << "depth=" << params.config.depth << "\n"
        << "base_channels=" << params.config.base_channels << "\n"
        << "in_channels=" << params.config.in_channels << "\n"
        << "out_channels=" << params.config.out_channels << "\n"
        << "output_activation=" << activation_name(params.config.output_activation) << "\n";
    if (val_mae) {
        cfg.precision(9);
        cfg << "val_mae=" << *val_mae << "\n";
    }
    const std::string cfg_block = cfg.str();
    put_u32(out, static_cast<uint32_t>(cfg_block.size()));
    out.write(cfg_block.data(), static_cast<std::streamsize>(cfg_block.size()));

    for (const auto& [name, tensor] : params.entries) {
        put_u32(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(out, static_cast<uint32_t>(tensor.rank()));
        for (Index a = 0; a < tensor.rank(); ++a)
            put_u32(out, static_cast<uint32_t>(tensor.dim(a)));
        for (Index i = 0; i < tensor.size(); ++i) put_f32(out, tensor[i]);
    }
    if (!out) throw std::runtime_error("short write to checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a checkpoint (bad magic): " + path);
    const uint32_t version = get_u32(in, "format version");
    if (version != kVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                                 " in " + path);

    const uint32_t cfg_len = get_u32(in, "config block length");
    std::string cfg_block(cfg_len, '\0');
    in.read(cfg_block.data(), cfg_len);
    if (in.gcount() != static_cast<std::streamsize>(cfg_len))
        throw std::runtime_error("truncated file while reading config block: " + path);

    std::map<std::string, std::string> kv;
    std::istringstream cfg_in(cfg_block);
    std::string line;
    while (std::getline(cfg_in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto need = [&kv, &path](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end())
            throw std::runtime_error("checkpoint config missing key '" + key + "': " + path);
        return it->second;
    };

    UNetConfig cfg;
    cfg.depth = std::stoi(need("depth"));
    cfg.base_channels = std::stoi(need("base_channels"));
    cfg.in_channels = std::stoi(need("in_channels"));
    cfg.out_channels = std::stoi(need("out_channels"));
    const std::string act = need("output_activation");
    if (act == "sigmoid") cfg.output_activation = UNetConfig::Activation::Sigmoid;
    else if (act == "linear") cfg.output_activation = UNetConfig::Activation::Linear;
    else throw std::runtime_error("checkpoint has unknown output_activation '" + act + "'");

    Checkpoint ckpt;
    if (auto it = kv.find("val_mae"); it != kv.end()) ckpt.val_mae = std::stof(it->second);
    ckpt.params.config = cfg;

    const auto table = unet_detail::parameter_table(cfg);
    for (const auto& slot : table) {
        const uint32_t name_len = get_u32(in, "parameter name length");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (in.gcount() != static_cast<std::streamsize>(name_len))
            throw std::runtime_error("truncated file while reading parameter name: " + path);
        const uint32_t rank = get_u32(in, "parameter rank");
        std::vector<Index> shape(rank);
        for (uint32_t a = 0; a < rank; ++a)
            shape[a] = static_cast<Index>(get_u32(in, "parameter extent"));

        if (name != slot.name || shape != slot.shape) {
            std::ostringstream msg;
            msg << "checkpoint shape table mismatch: expected " << slot.name << " "
                << shape_string(Tensor<float>(slot.shape)) << ", found " << name << " "
                << shape_string(Tensor<float>(shape)) << " in " << path;
            throw std::runtime_error(msg.str());
        }

        Tensor<float> t(shape);
        std::vector<unsigned char> buf(static_cast<size_t>(t.size()) * 4);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() != static_cast<std::streamsize>(buf.size()))
            throw std::runtime_error("truncated file inside tensor '" + name + "': " + path);
        for (Index i = 0; i < t.size(); ++i) {
            const size_t o = static_cast<size_t>(i) * 4;
            const uint32_t bits = static_cast<uint32_t>(buf[o]) |
                                  (static_cast<uint32_t>(buf[o + 1]) << 8) |
                                  (static_cast<uint32_t>(buf[o + 2]) << 16) |
                                  (static_cast<uint32_t>(buf[o + 3]) << 24);
            float v;
            std::memcpy(&v, &bits, 4);
            t[i] = v;
        }
        ckpt.params.entries.emplace_back(slot.name, std::move(t));
    }
    return ckpt;
}

}  // namespace fpdn
