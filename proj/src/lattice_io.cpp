#include <fstream>
#include <stdexcept>

#include "ardiff/lattice.hpp"
#include "binary_io.hpp"

namespace ardiff {

namespace {

constexpr std::string_view kMagic = "ARDCOUNT";
constexpr std::uint32_t kVersion = 1;

void write_count(std::ostream& os, const Count128& v) {
    io::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(v));
    io::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(v >> 64));
}

void write_count(std::ostream& os, const BigCount& v) {
    std::string bytes;
    boost::multiprecision::export_bits(v, std::back_inserter(bytes), 8, false);
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(bytes.size()));
    io::write_bytes(os, bytes);
}

}  // namespace

class CountTablesIo {
public:
    static void save(const CountTables& ct, std::ostream& os) {
        io::write_bytes(os, kMagic);
        io::write_le<std::uint32_t>(os, kVersion);
        io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ct.frames_));
        io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ct.timesteps_));
        io::write_le<std::uint32_t>(os, ct.is_wide() ? 0u : 128u);
        std::visit(
            [&os](const auto& s) {
                for (const auto& v : s.start) write_count(os, v);
                for (const auto& v : s.end) write_count(os, v);
            },
            ct.store_);
        if (!os) {
            throw std::runtime_error("CountTables::save: write failed");
        }
    }

    static CountTables load(std::istream& is) {
        io::expect_bytes(is, kMagic, "count-table");
        const auto version = io::read_le<std::uint32_t>(is, "version");
        if (version != kVersion) {
            throw io::FormatError("count-table: unsupported version " + std::to_string(version));
        }
        const auto F = io::read_le<std::uint32_t>(is, "F");
        const auto T = io::read_le<std::uint32_t>(is, "T");
        const auto width = io::read_le<std::uint32_t>(is, "integer width");
        if (F == 0 || T == 0 || F > 1u << 16 || T > 1u << 24) {
            throw io::FormatError("count-table: implausible dimensions");
        }
        const std::size_t n = static_cast<std::size_t>(F) * T;

        if (width != 0 && width != 128) {
            throw io::FormatError("count-table: unsupported integer width " + std::to_string(width));
        }
        std::vector<BigCount> stored(2 * n);
        for (auto& v : stored) {
            if (width == 128) {
                const auto lo = io::read_le<std::uint64_t>(is, "count");
                const auto hi = io::read_le<std::uint64_t>(is, "count");
                v = hi;
                v <<= 64;
                v += lo;
            } else {
                const auto len = io::read_le<std::uint32_t>(is, "count length");
                if (len > 4096) {
                    throw io::FormatError("count-table: oversized count entry");
                }
                std::string bytes(len, '\0');
                if (!is.read(bytes.data(), len)) {
                    throw io::FormatError("unexpected end of file reading count");
                }
                v = 0;
                boost::multiprecision::import_bits(v, bytes.begin(), bytes.end(), 8, false);
            }
        }

        // Running sums are derived data; rebuild and require the stored
        // counts to match exactly so a damaged cache can never bias sampling.
        CountTables ct = CountTables::build(static_cast<int>(F), static_cast<int>(T));
        if (width == 0 && !ct.is_wide()) {
            ct = CountTables::build_wide(static_cast<int>(F), static_cast<int>(T));
        }
        if (width == 128 && ct.is_wide()) {
            throw io::FormatError("count-table: counts exceed the declared 128-bit width");
        }
        for (std::uint32_t i = 0; i < F; ++i) {
            for (std::uint32_t t = 1; t <= T; ++t) {
                const std::size_t k = static_cast<std::size_t>(i) * T + (t - 1);
                if (stored[k] != ct.start(static_cast<int>(i), static_cast<int>(t)) ||
                    stored[n + k] != ct.end(static_cast<int>(i), static_cast<int>(t))) {
                    throw io::FormatError("count-table: stored counts are inconsistent");
                }
            }
        }
        return ct;
    }
};

void CountTables::save(std::ostream& os) const { CountTablesIo::save(*this, os); }

CountTables CountTables::load(std::istream& is) { return CountTablesIo::load(is); }

void CountTables::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    save(os);
}

CountTables CountTables::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw std::runtime_error("cannot open " + path);
    }
    return load(is);
}

}  // namespace ardiff
