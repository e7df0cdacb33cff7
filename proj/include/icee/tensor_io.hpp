#pragma once

#include <filesystem>
#include <iosfwd>

#include "icee/tensor.hpp"

namespace icee {

// Binary layout: "ICEE", u32 version (1), u32 rank, u64 dims[rank], f64 payload.
// All integers and doubles little-endian.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace icee
