#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spinn/autodiff/jet.hpp"
#include "spinn/models/model.hpp"

namespace spinn::problems {

enum class Domain { kInterval, kSquare, kSpaceTime };

std::string to_string(Domain d);

/// The hyperplane {x[dim] == position} restricted to the unit box.
struct Face {
  std::size_t dim = 0;
  double position = 0.0;

  std::string name(std::span<const std::string> coord_names) const;
  bool contains(std::span<const double> x) const { return x[dim] == position; }
};

using PointFunction = std::function<double(std::span<const double>)>;

struct DirichletCondition {
  Face face;
  PointFunction value;
};

/// reaction * u + sum_d first[d] * du/dx_d + sum_d second[d] * d2u/dx_d^2 - forcing(x).
struct LinearOperator {
  double reaction = 0.0;
  std::array<double, 2> first{};
  std::array<double, 2> second{};
  PointFunction forcing;  // empty means zero

  double forcing_at(std::span<const double> x) const { return forcing ? forcing(x) : 0.0; }
};

struct ProblemSpec {
  std::string name;
  std::string equation;  // human readable
  std::size_t input_dim = 1;
  double epsilon = 1e-3;
  Domain domain = Domain::kInterval;
  std::vector<std::string> coord_names;
  LinearOperator op;
  std::vector<DirichletCondition> dirichlet;
  std::optional<DirichletCondition> initial;  // time problems: the t = 0 face
  std::vector<models::AsymptoticPrior> priors;
  std::function<double(double)> exact;  // 1D problems with a closed form

  bool time_dependent() const { return domain == Domain::kSpaceTime; }
  bool has_exact() const { return static_cast<bool>(exact); }

  double residual(std::span<const double> x, const autodiff::DerivativeBundle& b) const;
  /// Open domain: (0,1)^d, or (0,1) x (0,1] in space-time.
  bool in_open_domain(std::span<const double> x) const;
  /// Dirichlet or initial value on a point lying on the given face.
  double boundary_value(const Face& face, std::span<const double> x) const;
};

const std::vector<std::string>& problem_names();

/// Throws LookupError for unknown names and ConfigError for epsilon <= 0.
ProblemSpec make_problem(const std::string& name, double epsilon);

std::vector<models::AsymptoticPrior> prior_for(const ProblemSpec& problem);
std::vector<models::AsymptoticPrior> prior_for(const std::string& name, double epsilon);

double exact_ex1(double x, double epsilon);
double exact_ex2(double x, double epsilon);
double exact_intro(double x, double epsilon);

}  // namespace spinn::problems
