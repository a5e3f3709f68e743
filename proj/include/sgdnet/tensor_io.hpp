#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "sgdnet/tensor.hpp"

namespace sgdnet {

// Raw little-endian f64 payload at `path`, header {"shape":[...],"dtype":"f64"}
// at `path` + ".json". Throws IoError.
void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

std::filesystem::path tensor_header_path(const std::filesystem::path& path);

// FNV-1a 64-bit over a file's bytes, hex encoded.
std::string file_checksum(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace sgdnet
