#include "spinn/sampling/sampling.hpp"

#include <cmath>
#include <numeric>

#include "spinn/error.hpp"
#include "spinn/random.hpp"

namespace spinn::sampling {

namespace {

enum Stream : std::uint64_t { kInterior = 1, kBoundary = 2, kInitial = 3 };

// A point of (0,1) drawn uniformly from stratum k of n.
double stratum_draw(Rng& rng, std::size_t k, std::size_t n) {
  for (;;) {
    const double x = (static_cast<double>(k) + rng.uniform()) / static_cast<double>(n);
    if (x > 0.0 && x < 1.0 && static_cast<std::size_t>(x * static_cast<double>(n)) == k) return x;
  }
}

// Splits n items over `parts` buckets as evenly as possible.
std::vector<std::size_t> split_even(std::size_t n, std::size_t parts) {
  std::vector<std::size_t> out(parts);
  for (std::size_t k = 0; k < parts; ++k) out[k] = n * (k + 1) / parts - n * k / parts;
  return out;
}

void sample_face(const problems::Face& face, std::size_t count, std::size_t dim, Rng& rng,
                 PointSet& out, std::vector<problems::Face>& faces) {
  std::vector<double> x(dim);
  if (dim == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      x[0] = face.position;
      out.push_back(x);
      faces.push_back(face);
    }
    return;
  }
  // Stratified along the tangential coordinate.
  const std::size_t t = 1 - face.dim;
  std::vector<std::size_t> perm(count);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);
  for (std::size_t i = 0; i < count; ++i) {
    x[face.dim] = face.position;
    x[t] = stratum_draw(rng, perm[i], count);
    out.push_back(x);
    faces.push_back(face);
  }
}

}  // namespace

void PointSet::push_back(std::span<const double> x) {
  if (x.size() != dim_) throw ConfigError("point dimension does not match point set");
  data_.insert(data_.end(), x.begin(), x.end());
}

void PointSet::append(const PointSet& other) {
  if (other.empty()) return;
  if (other.dim_ != dim_) throw ConfigError("point set dimensions differ");
  data_.insert(data_.end(), other.data_.begin(), other.data_.end());
}

networks::Matrix PointSet::coords() const {
  networks::Matrix m;
  m.resize(dim_, size());
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t d = 0; d < dim_; ++d) m.row(d)[i] = data_[i * dim_ + d];
  }
  return m;
}

PointSet lhs(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (n == 0) throw ConfigError("lhs needs at least one point");
  if (d == 0) throw ConfigError("lhs needs at least one dimension");
  Rng rng(seed, kInterior);
  std::vector<std::vector<std::size_t>> strata(d, std::vector<std::size_t>(n));
  for (auto& s : strata) {
    std::iota(s.begin(), s.end(), std::size_t{0});
    rng.shuffle(s);
  }
  PointSet out(d);
  std::vector<double> x(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) x[k] = stratum_draw(rng, strata[k][i], n);
    out.push_back(x);
  }
  return out;
}

SampleSet sample_problem(const problems::ProblemSpec& problem, std::uint64_t seed,
                         const SampleConfig& cfg) {
  const std::size_t dim = problem.input_dim;
  SampleSet s;
  s.interior = lhs(dim == 1 ? cfg.interior_1d : cfg.interior_2d, dim, seed);
  s.boundary = PointSet(dim);
  s.initial = PointSet(dim);

  Rng rng(seed, kBoundary);
  const auto& conds = problem.dirichlet;
  if (dim == 1) {
    for (const auto& c : conds) sample_face(c.face, 1, dim, rng, s.boundary, s.boundary_faces);
  } else {
    // Every face of the unit square has length 1, so a measure-proportional
    // split is an even one.
    const auto counts = cfg.boundary_per_face ? std::vector<std::size_t>(conds.size(), cfg.boundary)
                                              : split_even(cfg.boundary, conds.size());
    for (std::size_t k = 0; k < conds.size(); ++k) {
      sample_face(conds[k].face, counts[k], dim, rng, s.boundary, s.boundary_faces);
    }
  }
  if (problem.initial) {
    Rng irng(seed, kInitial);
    std::vector<problems::Face> ignored;
    sample_face(problem.initial->face, cfg.initial, dim, irng, s.initial, ignored);
  }
  return s;
}

}  // namespace spinn::sampling
