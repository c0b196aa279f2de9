#include "ardiff/tensor_io.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "binary_io.hpp"

namespace ardiff {

namespace {

constexpr std::string_view kMagic = "ARDIFFTENSOR";
constexpr std::uint32_t kVersion = 1;

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    return os;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw std::runtime_error("cannot open " + path);
    }
    return is;
}

}  // namespace

void write_tensor(std::ostream& os, std::span<const int> shape, std::span<const double> data, double scale_factor) {
    std::size_t n = 1;
    for (int s : shape) {
        if (s < 1) {
            throw std::invalid_argument("write_tensor: non-positive extent");
        }
        n *= static_cast<std::size_t>(s);
    }
    if (n != data.size()) {
        throw std::invalid_argument("write_tensor: shape does not match data length");
    }
    io::write_bytes(os, kMagic);
    io::write_le<std::uint32_t>(os, kVersion);
    nlohmann::json header;
    header["shape"] = std::vector<int>(shape.begin(), shape.end());
    header["dtype"] = "float32";
    header["byte_order"] = "little";
    header["scale_factor"] = scale_factor;
    io::write_bytes(os, header.dump());
    os.put('\n');
    for (double v : data) {
        io::write_f32(os, static_cast<float>(v));
    }
    if (!os) {
        throw std::runtime_error("write_tensor: write failed");
    }
}

Tensor read_tensor(std::istream& is) {
    io::expect_bytes(is, kMagic, "tensor");
    const auto version = io::read_le<std::uint32_t>(is, "version");
    if (version != kVersion) {
        throw io::FormatError("tensor: unsupported version " + std::to_string(version));
    }
    std::string line;
    if (!std::getline(is, line)) {
        throw io::FormatError("tensor: missing header");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw io::FormatError(std::string("tensor: malformed header: ") + e.what());
    }
    if (header.value("dtype", "") != "float32" || header.value("byte_order", "") != "little") {
        throw io::FormatError("tensor: only little-endian float32 is supported");
    }
    Tensor t;
    t.shape = header.at("shape").get<std::vector<int>>();
    t.scale_factor = header.value("scale_factor", 1.0);
    std::size_t n = 1;
    for (int s : t.shape) {
        if (s < 1) {
            throw io::FormatError("tensor: non-positive extent");
        }
        n *= static_cast<std::size_t>(s);
    }
    t.data.resize(n);
    for (double& v : t.data) {
        v = io::read_f32(is, "tensor data");
    }
    return t;
}

void write_latent(std::ostream& os, const LatentVideo& video, double scale_factor) {
    const int shape[] = {video.frames(), video.tokens(), video.dim()};
    write_tensor(os, shape, video.data(), scale_factor);
}

void write_latent(const std::string& path, const LatentVideo& video, double scale_factor) {
    auto os = open_out(path);
    write_latent(os, video, scale_factor);
}

LatentVideo read_latent(std::istream& is, double* scale_factor) {
    Tensor t = read_tensor(is);
    if (t.shape.size() != 3) {
        throw io::FormatError("latent: expected a rank-3 tensor [F, L, D]");
    }
    if (scale_factor != nullptr) {
        *scale_factor = t.scale_factor;
    }
    return LatentVideo(t.shape[0], t.shape[1], t.shape[2], std::move(t.data));
}

LatentVideo read_latent(const std::string& path, double* scale_factor) {
    auto is = open_in(path);
    return read_latent(is, scale_factor);
}

void write_dataset(const std::string& path, std::span<const LatentVideo> videos, double scale_factor) {
    if (videos.empty()) {
        throw std::invalid_argument("write_dataset: no videos");
    }
    std::vector<double> flat;
    for (const LatentVideo& v : videos) {
        if (!v.same_shape(videos.front())) {
            throw std::invalid_argument("write_dataset: videos differ in shape");
        }
        flat.insert(flat.end(), v.data().begin(), v.data().end());
    }
    const int shape[] = {static_cast<int>(videos.size()), videos.front().frames(), videos.front().tokens(),
                         videos.front().dim()};
    auto os = open_out(path);
    write_tensor(os, shape, flat, scale_factor);
}

std::vector<LatentVideo> read_dataset(const std::string& path, double* scale_factor) {
    auto is = open_in(path);
    Tensor t = read_tensor(is);
    if (t.shape.size() != 4) {
        throw io::FormatError("dataset: expected a rank-4 tensor [n, F, L, D]");
    }
    if (scale_factor != nullptr) {
        *scale_factor = t.scale_factor;
    }
    const std::size_t each = static_cast<std::size_t>(t.shape[1]) * t.shape[2] * t.shape[3];
    std::vector<LatentVideo> out;
    out.reserve(static_cast<std::size_t>(t.shape[0]));
    for (int i = 0; i < t.shape[0]; ++i) {
        const auto first = t.data.begin() + static_cast<std::ptrdiff_t>(i * each);
        out.emplace_back(t.shape[1], t.shape[2], t.shape[3], std::vector<double>(first, first + each));
    }
    return out;
}

void write_latent_csv(std::ostream& os, const LatentVideo& video) {
    os << "frame,token,dim,value\n";
    char buf[64];
    for (int f = 0; f < video.frames(); ++f) {
        const auto fr = video.frame(f);
        for (int l = 0; l < video.tokens(); ++l) {
            for (int d = 0; d < video.dim(); ++d) {
                std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(static_cast<float>(
                                                           fr[static_cast<std::size_t>(l) * video.dim() + d])));
                os << f << ',' << l << ',' << d << ',' << buf << '\n';
            }
        }
    }
}

}  // namespace ardiff
