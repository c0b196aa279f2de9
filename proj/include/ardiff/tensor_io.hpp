#pragma once

// Binary tensor files: a 16-byte preamble ("ARDIFFTENSOR" + u32 version), a
// single-line JSON header
//   {"byte_order":"little","dtype":"float32","scale_factor":s,"shape":[...]}
// terminated by '\n', then the raw little-endian float32 values, row-major.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ardiff/schedule.hpp"

namespace ardiff {

struct Tensor {
    std::vector<int> shape;
    double scale_factor = 1.0;
    std::vector<double> data;  // widened from float32 on read
};

void write_tensor(std::ostream& os, std::span<const int> shape, std::span<const double> data, double scale_factor);
Tensor read_tensor(std::istream& is);

/// Shape [F, L, D].
void write_latent(std::ostream& os, const LatentVideo& video, double scale_factor);
void write_latent(const std::string& path, const LatentVideo& video, double scale_factor);
LatentVideo read_latent(std::istream& is, double* scale_factor = nullptr);
LatentVideo read_latent(const std::string& path, double* scale_factor = nullptr);

/// A list of equally shaped videos as one tensor of shape [n, F, L, D].
void write_dataset(const std::string& path, std::span<const LatentVideo> videos, double scale_factor);
std::vector<LatentVideo> read_dataset(const std::string& path, double* scale_factor = nullptr);

/// Long-format dump with header "frame,token,dim,value".
void write_latent_csv(std::ostream& os, const LatentVideo& video);

}  // namespace ardiff
