#include "venibot/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "venibot/errors.hpp"

namespace venibot::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'V', 'B', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;

std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::kF64: return 8;
    case DType::kF32: return 4;
    case DType::kU8: return 1;
  }
  throw DataError("checkpoint: unknown dtype code " + std::to_string(static_cast<int>(d)));
}

template <typename V>
void put(std::ofstream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::ifstream& is, const std::filesystem::path& path) {
  V v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(V))) throw DataError("checkpoint: truncated file " + path.string());
  return v;
}

template <typename T>
constexpr DType dtype_of() {
  return sizeof(T) == 8 ? DType::kF64 : DType::kF32;
}

}  // namespace

std::uint64_t StoredTensor::count() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::vector<double> StoredTensor::as_f64() const {
  std::vector<double> out(count());
  if (bytes.size() != count() * dtype_size(dtype)) throw DataError("checkpoint: record '" + name + "' is corrupt");
  for (std::size_t i = 0; i < out.size(); ++i) {
    switch (dtype) {
      case DType::kF64: std::memcpy(&out[i], bytes.data() + 8 * i, 8); break;
      case DType::kF32: {
        float f;
        std::memcpy(&f, bytes.data() + 4 * i, 4);
        out[i] = f;
        break;
      }
      case DType::kU8: out[i] = bytes[i]; break;
    }
  }
  return out;
}

std::string StoredTensor::as_string() const { return std::string(bytes.begin(), bytes.end()); }

StoredTensor StoredTensor::text(std::string name, const std::string& s) {
  StoredTensor r;
  r.name = std::move(name);
  r.dtype = DType::kU8;
  r.dims = {s.size()};
  r.bytes.assign(s.begin(), s.end());
  return r;
}

template <typename T>
StoredTensor StoredTensor::from(std::string name, const Tensor<T>& t) {
  StoredTensor r;
  r.name = std::move(name);
  r.dtype = dtype_of<T>();
  const Shape s = t.shape();
  r.dims = {static_cast<std::uint64_t>(s.n), static_cast<std::uint64_t>(s.c), static_cast<std::uint64_t>(s.h),
            static_cast<std::uint64_t>(s.w)};
  r.bytes.resize(t.size() * sizeof(T));
  std::memcpy(r.bytes.data(), t.data(), r.bytes.size());
  return r;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<StoredTensor>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    if (r.bytes.size() != r.count() * dtype_size(r.dtype))
      throw DataError("checkpoint: record '" + r.name + "' size does not match its dims");
    put<std::uint32_t>(os, static_cast<std::uint32_t>(r.name.size()));
    os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(r.dtype));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(r.dims.size()));
    for (auto d : r.dims) put<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(r.bytes.data()), static_cast<std::streamsize>(r.bytes.size()));
  }
  if (!os) throw IoError("write failed for checkpoint " + path.string());
}

std::vector<StoredTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("not a VBNN checkpoint: " + path.string());
  const auto version = get<std::uint32_t>(is, path);
  if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get<std::uint32_t>(is, path);
  std::vector<StoredTensor> out;
  out.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    StoredTensor r;
    const auto len = get<std::uint32_t>(is, path);
    if (len > (1u << 16)) throw DataError("checkpoint: implausible name length in " + path.string());
    r.name.resize(len);
    if (!is.read(r.name.data(), len)) throw DataError("checkpoint: truncated file " + path.string());
    r.dtype = static_cast<DType>(get<std::uint8_t>(is, path));
    const auto rank = get<std::uint32_t>(is, path);
    if (rank > 8) throw DataError("checkpoint: implausible rank in " + path.string());
    for (std::uint32_t i = 0; i < rank; ++i) r.dims.push_back(get<std::uint64_t>(is, path));
    r.bytes.resize(r.count() * dtype_size(r.dtype));
    if (!is.read(reinterpret_cast<char*>(r.bytes.data()), static_cast<std::streamsize>(r.bytes.size())))
      throw DataError("checkpoint: truncated file " + path.string());
    out.push_back(std::move(r));
  }
  return out;
}

const StoredTensor* find_record(const std::vector<StoredTensor>& records, const std::string& name) {
  for (const auto& r : records)
    if (r.name == name) return &r;
  return nullptr;
}

template <typename T>
std::vector<StoredTensor> export_graph(Graph<T>& g) {
  if (!g.initialized()) throw StateError("export_graph: graph is not initialized");
  std::vector<StoredTensor> out;
  for (auto& [name, t] : g.named_tensors()) out.push_back(StoredTensor::from(name, *t));
  return out;
}

template <typename T>
void import_graph(Graph<T>& g, const std::vector<StoredTensor>& records) {
  if (!g.initialized()) throw StateError("import_graph: graph is not initialized");
  for (auto& [name, t] : g.named_tensors()) {
    const auto* r = find_record(records, name);
    if (!r) throw DataError("checkpoint has no tensor '" + name + "'");
    const Shape s = t->shape();
    const std::vector<std::uint64_t> dims = {static_cast<std::uint64_t>(s.n), static_cast<std::uint64_t>(s.c),
                                             static_cast<std::uint64_t>(s.h), static_cast<std::uint64_t>(s.w)};
    if (r->dims != dims || r->dtype == DType::kU8)
      throw DataError("checkpoint tensor '" + name + "' does not match shape " + s.str());
    if (r->dtype == dtype_of<T>()) {
      std::memcpy(t->data(), r->bytes.data(), r->bytes.size());
    } else {
      const auto v = r->as_f64();
      for (std::size_t i = 0; i < v.size(); ++i) (*t)[i] = static_cast<T>(v[i]);
    }
  }
}

template StoredTensor StoredTensor::from<float>(std::string, const Tensor<float>&);
template StoredTensor StoredTensor::from<double>(std::string, const Tensor<double>&);
template std::vector<StoredTensor> export_graph<float>(Graph<float>&);
template std::vector<StoredTensor> export_graph<double>(Graph<double>&);
template void import_graph<float>(Graph<float>&, const std::vector<StoredTensor>&);
template void import_graph<double>(Graph<double>&, const std::vector<StoredTensor>&);

}  // namespace venibot::nn
