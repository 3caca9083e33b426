#include "msgf/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "msgf/error.hpp"

namespace msgf {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'G', 'T'};
constexpr std::uint32_t kMaxRank = 8;

template <class T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

template <class T>
void put(std::ostream& os, T v) {
  v = to_le(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, std::size_t& offset, const char* what) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (is.gcount() != static_cast<std::streamsize>(sizeof(T)))
    throw ParseError(std::string("MSGT truncated while reading ") + what, offset);
  offset += sizeof(T);
  return to_le(v);
}

}  // namespace

void write_msgt(std::ostream& os, const Tensor& t) {
  os.write(kMagic, 4);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) put<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  for (double v : t.data()) put<double>(os, v);
  if (!os) throw IoError("failed writing MSGT tensor");
}

Tensor read_msgt(std::istream& is) {
  std::size_t offset = 0;
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError("bad MSGT magic", offset);
  offset += 4;
  const auto rank = get<std::uint32_t>(is, offset, "rank");
  if (rank == 0 || rank > kMaxRank)
    throw ParseError("MSGT rank " + std::to_string(rank) + " not in [1," +
                         std::to_string(kMaxRank) + "]",
                     offset - 4);
  Shape shape;
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const auto d = get<std::uint32_t>(is, offset, "dims");
    if (d == 0) throw ParseError("MSGT dimension is zero", offset - 4);
    count *= d;
    if (count > (std::size_t{1} << 32)) throw ParseError("MSGT payload too large", offset - 4);
    shape.push_back(d);
  }
  // Grow as bytes arrive so a corrupt header cannot force a huge allocation.
  std::vector<double> data;
  data.reserve(std::min<std::size_t>(count, 1 << 16));
  for (std::size_t i = 0; i < count; ++i) data.push_back(get<double>(is, offset, "payload"));
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const Tensor& t, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_msgt(os, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_msgt(is);
}

std::string encode_msgt(const Tensor& t) {
  std::ostringstream os(std::ios::binary);
  write_msgt(os, t);
  return os.str();
}

Tensor decode_msgt(const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  return read_msgt(is);
}

}  // namespace msgf
