#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "venibot/nn/graph.hpp"

namespace venibot::nn {

enum class DType : std::uint8_t { kF64 = 0, kF32 = 1, kU8 = 2 };

/// One named record of a checkpoint file.
struct StoredTensor {
  std::string name;
  DType dtype = DType::kF64;
  std::vector<std::uint64_t> dims;
  std::vector<std::uint8_t> bytes;  // raw little-endian values

  std::uint64_t count() const;
  std::vector<double> as_f64() const;
  std::string as_string() const;  // for kU8 records

  static StoredTensor text(std::string name, const std::string& s);
  template <typename T>
  static StoredTensor from(std::string name, const Tensor<T>& t);
};

// Container layout, little-endian: "VBNN", u32 version, u32 record count, then
// per record {u32 name length, name bytes, u8 dtype, u32 rank, u64 dims[rank],
// raw values}.
void save_checkpoint(const std::filesystem::path& path, const std::vector<StoredTensor>& records);
std::vector<StoredTensor> load_checkpoint(const std::filesystem::path& path);

const StoredTensor* find_record(const std::vector<StoredTensor>& records, const std::string& name);

/// Parameters and buffers of an initialized graph, in its own precision.
template <typename T>
std::vector<StoredTensor> export_graph(Graph<T>& g);
/// Loads every graph tensor from `records` (converting precision if needed);
/// a missing or mis-shaped record is a DataError naming the tensor.
template <typename T>
void import_graph(Graph<T>& g, const std::vector<StoredTensor>& records);

}  // namespace venibot::nn
