#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "spinn/problems/problem.hpp"

namespace spinn::fdm {

/// Piecewise-uniform mesh on [0,1] with half the intervals inside the layer
/// region of width tau next to the layer.
struct ShishkinMesh {
  std::vector<double> nodes;
  double tau = 0.5;
  double sigma = 2.0;
  double beta = 1.0;
  bool layer_at_right = true;

  std::size_t intervals() const { return nodes.size() - 1; }
};

/// N must be even and at least 2. tau = min(1/2, sigma eps / beta ln N).
ShishkinMesh shishkin_mesh(std::size_t n, double epsilon, double beta, bool layer_at_right,
                           double sigma = 2.0);
std::vector<double> uniform_nodes(std::size_t n);

/// Nodal values on a tensor grid. values[j * x.size() + i] holds u(x[i], y[j]);
/// y is empty for 1D problems (and is t for space-time problems).
struct GridSolution {
  std::string problem;
  double epsilon = 0.0;
  std::size_t n = 0;  // spatial intervals
  std::size_t m = 0;  // intervals along the second coordinate (0 in 1D)
  std::string scheme;
  double tau = 0.0;
  std::vector<std::string> coord_names;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> values;

  std::size_t dims() const { return y.empty() ? 1 : 2; }
  std::size_t node_count() const { return values.size(); }
  double at(std::size_t i, std::size_t j = 0) const { return values[j * x.size() + i]; }
  /// Piecewise (bi)linear interpolation.
  double interpolate(std::span<const double> p) const;
  /// dims x node_count coordinates, in storage order.
  std::vector<std::vector<double>> coordinates() const;
};

/// -eps u'' + b u' + c u = f, upwind convection, central diffusion.
GridSolution solve_steady_1d(const problems::ProblemSpec& problem, std::size_t n);

/// Ex3 and Ex4: Shishkin along the layer normal, uniform along the tangent.
/// The tangential second difference is diagonalized by a sine transform and
/// each mode is a tridiagonal solve along the normal.
GridSolution solve_steady_2d(const problems::ProblemSpec& problem, std::size_t n);

/// Ex5 and Ex6: implicit Euler with m uniform steps, Shishkin-upwind in x.
GridSolution solve_parabolic(const problems::ProblemSpec& problem, std::size_t n, std::size_t m);

/// Picks the solver for the problem; m is ignored for steady problems.
GridSolution solve_reference(const problems::ProblemSpec& problem, std::size_t n, std::size_t m);

/// Solves a[i] x[i-1] + b[i] x[i] + c[i] x[i+1] = d[i] in place (d becomes x).
void solve_tridiagonal(std::span<const double> a, std::span<const double> b,
                       std::span<const double> c, std::span<double> d);

// --- persistence ----------------------------------------------------------------

std::string sha256_hex(const std::filesystem::path& file);

/// Writes `csv` and its metadata sidecar (same stem, .json). Returns the
/// checksum of the CSV.
std::string write_grid(const GridSolution& g, const std::filesystem::path& csv);
/// Reads a grid back and verifies the checksum in its sidecar.
GridSolution read_grid(const std::filesystem::path& csv);
std::filesystem::path sidecar_path(const std::filesystem::path& csv);

}  // namespace spinn::fdm
