#include "turbrec/npy.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace turb {

static_assert(std::endian::native == std::endian::little, "NPY writer assumes little-endian host");

namespace {

constexpr char kMagic[] = "\x93NUMPY";

// Matches numpy's own formatting so files are byte-identical with np.save.
std::string header_dict(const std::vector<int>& dims) {
  std::ostringstream os;
  os << "{'descr': '<f8', 'fortran_order': False, 'shape': (";
  for (size_t i = 0; i < dims.size(); ++i) {
    os << dims[i];
    if (i + 1 < dims.size()) os << ", ";
  }
  if (dims.size() == 1) os << ",";
  os << "), }";
  return os.str();
}

}  // namespace

void npy_save(const std::filesystem::path& path, const Tensor& t) {
  std::string dict = header_dict(t.dims);
  // magic(6) + version(2) + header_len(2) + dict + padding + '\n', total % 64 == 0
  size_t unpadded = 10 + dict.size() + 1;
  size_t padded = (unpadded + 63) / 64 * 64;
  dict.append(padded - unpadded, ' ');
  dict.push_back('\n');
  if (dict.size() > 0xFFFF) throw std::runtime_error("npy header too long");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(kMagic, 6);
  out.put('\x01');
  out.put('\x00');
  const auto len = static_cast<std::uint16_t>(dict.size());
  out.put(static_cast<char>(len & 0xFF));
  out.put(static_cast<char>(len >> 8));
  out.write(dict.data(), static_cast<std::streamsize>(dict.size()));
  out.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Tensor npy_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, kMagic, 6) != 0)
    throw std::runtime_error("not an NPY file: " + path.string());
  unsigned char major = static_cast<unsigned char>(in.get());
  in.get();  // minor
  if (major != 1) throw std::runtime_error("unsupported NPY version in " + path.string());
  const int lo = in.get(), hi = in.get();
  if (lo < 0 || hi < 0) throw std::runtime_error("truncated NPY header: " + path.string());
  const size_t header_len = static_cast<size_t>(lo) | (static_cast<size_t>(hi) << 8);
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("truncated NPY header: " + path.string());

  if (header.find("'descr': '<f8'") == std::string::npos)
    throw std::runtime_error("NPY dtype must be <f8 in " + path.string());
  if (header.find("'fortran_order': False") == std::string::npos)
    throw std::runtime_error("NPY must be C-order in " + path.string());

  const size_t open = header.find('(');
  const size_t close = header.find(')', open);
  if (open == std::string::npos || close == std::string::npos)
    throw std::runtime_error("malformed NPY shape in " + path.string());
  std::vector<int> dims;
  std::string shape = header.substr(open + 1, close - open - 1);
  std::istringstream ss(shape);
  std::string piece;
  while (std::getline(ss, piece, ',')) {
    // allow trailing comma of 1-tuples and stray spaces
    size_t pos = piece.find_first_not_of(' ');
    if (pos == std::string::npos) continue;
    dims.push_back(std::stoi(piece.substr(pos)));
  }
  if (dims.empty()) throw std::runtime_error("scalar NPY arrays are not supported: " + path.string());

  size_t count = 1;
  for (int d : dims) {
    if (d <= 0) throw std::runtime_error("bad NPY shape in " + path.string());
    count *= static_cast<size_t>(d);
  }
  std::vector<double> values(count);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw std::runtime_error("truncated NPY data: " + path.string());
  return Tensor(std::move(dims), std::move(values));
}

}  // namespace turb
