#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spinn/networks/batched.hpp"
#include "spinn/problems/problem.hpp"

namespace spinn::sampling {

/// Points of one dimension, stored point-major.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const { return data_.empty(); }
  std::span<const double> operator[](std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  void push_back(std::span<const double> x);
  void append(const PointSet& other);
  const std::vector<double>& data() const { return data_; }

  /// dim x size, the coordinate layout the batched evaluators take.
  networks::Matrix coords() const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

struct SampleSet {
  PointSet interior;
  PointSet boundary;
  std::vector<problems::Face> boundary_faces;  // one per boundary point
  PointSet initial;
};

struct SampleConfig {
  std::size_t interior_1d = 1000;
  std::size_t interior_2d = 10000;
  std::size_t boundary = 100;
  std::size_t initial = 100;
  /// When true every Dirichlet face receives `boundary` points instead of
  /// sharing them in proportion to face length.
  bool boundary_per_face = false;
};

/// Latin hypercube sample of n points in [0,1]^d with uniform jitter inside
/// each stratum. Every coordinate lies strictly inside its stratum and in (0,1).
PointSet lhs(std::size_t n, std::size_t d, std::uint64_t seed);

SampleSet sample_problem(const problems::ProblemSpec& problem, std::uint64_t seed,
                         const SampleConfig& cfg = {});

}  // namespace spinn::sampling
