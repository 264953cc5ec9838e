#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spinn::networks {

struct TensorSpec {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;

  std::size_t size() const;
  bool operator==(const TensorSpec& other) const = default;
};

/// Flat parameter vector plus a shape table naming contiguous slices.
class NetworkParams {
 public:
  NetworkParams() = default;

  /// Zero-filled store; offsets are assigned in table order.
  static NetworkParams zeros(std::vector<TensorSpec> table);

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  const std::vector<TensorSpec>& table() const { return table_; }
  std::size_t size() const { return values_.size(); }

  const TensorSpec& spec(std::string_view name) const;
  std::span<double> tensor(std::string_view name);
  std::span<const double> tensor(std::string_view name) const;

  /// Named copies of every tensor.
  std::map<std::string, std::vector<double>> unpack() const;
  /// Overwrites every tensor from `tensors`; names and sizes must match the table.
  void pack(const std::map<std::string, std::vector<double>>& tensors);

  bool operator==(const NetworkParams& other) const = default;

 private:
  std::vector<double> values_;
  std::vector<TensorSpec> table_;
};

}  // namespace spinn::networks
