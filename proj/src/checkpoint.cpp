#include <fstream>

#include "ardiff/denoiser.hpp"
#include "binary_io.hpp"

namespace ardiff {

namespace {

constexpr std::string_view kMagic = "ARDPARAM";
constexpr std::uint32_t kVersion = 1;

}  // namespace

void DenoiserParams::save(std::ostream& os) const {
    io::write_bytes(os, kMagic);
    io::write_le<std::uint32_t>(os, kVersion);
    for (int v : {config_.frames, config_.tokens, config_.dim, config_.timesteps, config_.d_model, config_.n_layers,
                  config_.n_heads, config_.mlp_hidden}) {
        io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(v));
    }
    io::write_f64(os, config_.x0_clamp);
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(specs_.size()));
    for (const TensorSpec& s : specs_) {
        io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.name.size()));
        io::write_bytes(os, s.name);
        io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.shape.size()));
        for (int dim : s.shape) {
            io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(dim));
        }
        for (double v : tensor(s)) {
            io::write_f32(os, static_cast<float>(v));
        }
    }
    if (!os) {
        throw std::runtime_error("checkpoint: write failed");
    }
}

void DenoiserParams::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    save(os);
}

DenoiserParams DenoiserParams::load(std::istream& is) {
    io::expect_bytes(is, kMagic, "checkpoint");
    const auto version = io::read_le<std::uint32_t>(is, "version");
    if (version != kVersion) {
        throw io::FormatError("checkpoint: unsupported version " + std::to_string(version));
    }
    DenoiserConfig cfg;
    for (int* field : {&cfg.frames, &cfg.tokens, &cfg.dim, &cfg.timesteps, &cfg.d_model, &cfg.n_layers,
                       &cfg.n_heads, &cfg.mlp_hidden}) {
        const auto v = io::read_le<std::uint32_t>(is, "config");
        if (v > (1u << 24)) {
            throw io::FormatError("checkpoint: implausible config value");
        }
        *field = static_cast<int>(v);
    }
    cfg.x0_clamp = io::read_f64(is, "x0_clamp");
    DenoiserParams p(cfg);

    const auto count = io::read_le<std::uint32_t>(is, "tensor count");
    if (count != p.specs_.size()) {
        throw io::FormatError("checkpoint: tensor count does not match the config");
    }
    for (const TensorSpec& s : p.specs_) {
        const auto len = io::read_le<std::uint32_t>(is, "name length");
        if (len > 256) {
            throw io::FormatError("checkpoint: oversized tensor name");
        }
        std::string name(len, '\0');
        if (!is.read(name.data(), len) || name != s.name) {
            throw io::FormatError("checkpoint: expected tensor " + s.name + ", found " + name);
        }
        const auto rank = io::read_le<std::uint32_t>(is, "rank");
        if (rank != s.shape.size()) {
            throw io::FormatError("checkpoint: rank mismatch for " + s.name);
        }
        for (int dim : s.shape) {
            if (io::read_le<std::uint32_t>(is, "shape") != static_cast<std::uint32_t>(dim)) {
                throw io::FormatError("checkpoint: shape mismatch for " + s.name);
            }
        }
        for (double& v : p.tensor(s)) {
            v = io::read_f32(is, "tensor data");
        }
    }
    return p;
}

DenoiserParams DenoiserParams::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw std::runtime_error("cannot open " + path);
    }
    return load(is);
}

}  // namespace ardiff
