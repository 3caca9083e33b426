#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "msgf/tensor.hpp"

namespace msgf {

// MSGT binary layout (all little-endian):
//   "MSGT" | u32 rank | u32 dims[rank] | f64 payload[prod(dims)]
void write_msgt(std::ostream& os, const Tensor& t);
Tensor read_msgt(std::istream& is);

void save_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

std::string encode_msgt(const Tensor& t);
Tensor decode_msgt(const std::string& bytes);

}  // namespace msgf
