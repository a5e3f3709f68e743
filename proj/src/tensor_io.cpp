#include "sgdnet/tensor_io.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "sgdnet/error.hpp"

namespace sgdnet {

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

std::filesystem::path tensor_header_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  nlohmann::json header;
  header["shape"] = t.shape();
  header["dtype"] = "f64";
  write_text(tensor_header_path(path), header.dump() + "\n");

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(t.raw()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!os) throw IoError("failed writing " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(read_text(tensor_header_path(path)));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad tensor header for " + path.string() + ": " + e.what());
  }
  if (header.value("dtype", "") != "f64") throw IoError("unsupported dtype in " + path.string());
  Shape shape = header.at("shape").get<Shape>();
  std::vector<double> data(shape_numel(shape));

  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) throw IoError("cannot open " + path.string());
  const auto bytes = static_cast<std::size_t>(is.tellg());
  if (bytes != data.size() * sizeof(double)) {
    throw IoError(path.string() + ": payload has " + std::to_string(bytes) + " bytes, header implies " +
                  std::to_string(data.size() * sizeof(double)));
  }
  is.seekg(0);
  is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
  if (!is) throw IoError("failed reading " + path.string());
  return Tensor(std::move(shape), std::move(data));
}

std::string file_checksum(const std::filesystem::path& path) {
  const std::string bytes = read_text(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sgdnet
