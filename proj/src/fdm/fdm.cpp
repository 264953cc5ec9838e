#include "spinn/fdm/fdm.hpp"

#include <fftw3.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <memory>

#include "spinn/error.hpp"
#include "json.hpp"

namespace spinn::fdm {

namespace {

// -a u'' + b u' + c u = f after fixing the sign so that a > 0.
struct Normalized {
  double a, b, c, sign;
};

Normalized normalize(const problems::ProblemSpec& p, std::size_t d) {
  const double second = p.op.second[d];
  if (second == 0.0) throw ConfigError("reference solver needs diffusion along the layer normal");
  const double s = second < 0.0 ? 1.0 : -1.0;
  return {-s * second, s * p.op.first[d], s * p.op.reaction, s};
}

ShishkinMesh normal_mesh(const problems::ProblemSpec& p, const Normalized& op, std::size_t n) {
  if (op.b == 0.0) throw ConfigError("reference solver needs convection along the layer normal");
  return shishkin_mesh(n, p.epsilon, std::abs(op.b) / op.a * p.epsilon, op.b > 0.0);
}

// Row of the upwind / central three-point operator at interior node i.
struct Stencil {
  double lower, diag, upper;
};

Stencil stencil(const std::vector<double>& x, std::size_t i, const Normalized& op) {
  const double hl = x[i] - x[i - 1];
  const double hr = x[i + 1] - x[i];
  const double hbar = 0.5 * (hl + hr);
  Stencil s{-op.a / (hl * hbar), op.a / (hl * hbar) + op.a / (hr * hbar) + op.c, -op.a / (hr * hbar)};
  if (op.b > 0.0) {
    s.lower -= op.b / hl;
    s.diag += op.b / hl;
  } else {
    s.upper += op.b / hr;
    s.diag -= op.b / hr;
  }
  return s;
}

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(what) + " produced a non-finite value");
  }
}

struct FftwPlan {
  double* in = nullptr;
  double* out = nullptr;
  fftw_plan plan = nullptr;
  explicit FftwPlan(std::size_t n) {
    in = fftw_alloc_real(n);
    out = fftw_alloc_real(n);
    plan = fftw_plan_r2r_1d(static_cast<int>(n), in, out, FFTW_RODFT00, FFTW_ESTIMATE);
    if (!plan) throw NumericError("could not create a sine transform plan");
  }
  ~FftwPlan() {
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
  FftwPlan(const FftwPlan&) = delete;
  FftwPlan& operator=(const FftwPlan&) = delete;
};

GridSolution make_grid(const problems::ProblemSpec& p, std::size_t n, std::size_t m,
                       const std::string& scheme, double tau) {
  GridSolution g;
  g.problem = p.name;
  g.epsilon = p.epsilon;
  g.n = n;
  g.m = m;
  g.scheme = scheme;
  g.tau = tau;
  g.coord_names = p.coord_names;
  return g;
}

}  // namespace

ShishkinMesh shishkin_mesh(std::size_t n, double epsilon, double beta, bool layer_at_right,
                           double sigma) {
  if (n < 2 || n % 2 != 0) throw ConfigError("Shishkin mesh needs an even interval count >= 2");
  if (!(epsilon > 0.0) || !(beta > 0.0) || !(sigma > 0.0)) {
    throw ConfigError("Shishkin mesh parameters must be positive");
  }
  ShishkinMesh mesh;
  mesh.sigma = sigma;
  mesh.beta = beta;
  mesh.layer_at_right = layer_at_right;
  mesh.tau = std::min(0.5, sigma * epsilon / beta * std::log(static_cast<double>(n)));
  const std::size_t half = n / 2;
  const double fine = mesh.tau / static_cast<double>(half);
  const double coarse = (1.0 - mesh.tau) / static_cast<double>(half);
  mesh.nodes.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    double x;
    if (layer_at_right) {
      x = i <= half ? static_cast<double>(i) * coarse
                    : (1.0 - mesh.tau) + static_cast<double>(i - half) * fine;
    } else {
      x = i <= half ? static_cast<double>(i) * fine
                    : mesh.tau + static_cast<double>(i - half) * coarse;
    }
    mesh.nodes[i] = x;
  }
  mesh.nodes[n] = 1.0;
  return mesh;
}

std::vector<double> uniform_nodes(std::size_t n) {
  if (n == 0) throw ConfigError("need at least one interval");
  std::vector<double> x(n + 1);
  for (std::size_t i = 0; i <= n; ++i) x[i] = static_cast<double>(i) / static_cast<double>(n);
  return x;
}

void solve_tridiagonal(std::span<const double> a, std::span<const double> b,
                       std::span<const double> c, std::span<double> d) {
  const std::size_t n = d.size();
  if (a.size() != n || b.size() != n || c.size() != n) throw ConfigError("tridiagonal sizes differ");
  if (n == 0) return;
  std::vector<double> cp(n);
  double denom = b[0];
  if (denom == 0.0 || !std::isfinite(denom)) throw NumericError("singular tridiagonal system");
  cp[0] = c[0] / denom;
  d[0] /= denom;
  for (std::size_t i = 1; i < n; ++i) {
    denom = b[i] - a[i] * cp[i - 1];
    if (denom == 0.0 || !std::isfinite(denom)) throw NumericError("singular tridiagonal system");
    cp[i] = c[i] / denom;
    d[i] = (d[i] - a[i] * d[i - 1]) / denom;
  }
  for (std::size_t i = n - 1; i-- > 0;) d[i] -= cp[i] * d[i + 1];
}

GridSolution solve_steady_1d(const problems::ProblemSpec& p, std::size_t n) {
  if (p.input_dim != 1) throw ConfigError("solve_steady_1d needs a 1D problem");
  const Normalized op = normalize(p, 0);
  const ShishkinMesh mesh = normal_mesh(p, op, n);
  const auto& x = mesh.nodes;
  GridSolution g = make_grid(p, n, 0, "shishkin-upwind", mesh.tau);
  g.x = x;

  const double left = p.boundary_value({0, 0.0}, std::vector<double>{0.0});
  const double right = p.boundary_value({0, 1.0}, std::vector<double>{1.0});
  const std::size_t k = n - 1;
  std::vector<double> lo(k), di(k), up(k), rhs(k);
  for (std::size_t i = 1; i < n; ++i) {
    const Stencil s = stencil(x, i, op);
    lo[i - 1] = s.lower;
    di[i - 1] = s.diag;
    up[i - 1] = s.upper;
    rhs[i - 1] = op.sign * p.op.forcing_at(std::vector<double>{x[i]});
  }
  rhs.front() -= lo.front() * left;
  rhs.back() -= up.back() * right;
  lo.front() = 0.0;
  up.back() = 0.0;
  solve_tridiagonal(lo, di, up, rhs);

  g.values.resize(n + 1);
  g.values[0] = left;
  g.values[n] = right;
  std::copy(rhs.begin(), rhs.end(), g.values.begin() + 1);
  check_finite(g.values, "1D reference solve");
  return g;
}

GridSolution solve_steady_2d(const problems::ProblemSpec& p, std::size_t n) {
  if (p.input_dim != 2 || p.time_dependent()) throw ConfigError("solve_steady_2d needs a steady 2D problem");
  if (p.priors.empty()) throw ConfigError("2D reference solver needs the layer location");
  const std::size_t nd = p.priors.front().normal_dim;
  const std::size_t td = 1 - nd;
  const Normalized op = normalize(p, nd);
  if (p.op.first[td] != 0.0 || p.op.second[td] != p.op.second[nd]) {
    throw ConfigError("2D reference solver needs pure isotropic diffusion along the tangent");
  }
  const ShishkinMesh mesh = normal_mesh(p, op, n);
  const std::vector<double>& xn = mesh.nodes;
  const std::vector<double> xt = uniform_nodes(n);
  const double kt = 1.0 / static_cast<double>(n);

  auto point = [&](std::size_t i, std::size_t j) {
    std::vector<double> q(2);
    q[nd] = xn[i];
    q[td] = xt[j];
    return q;
  };
  // Tangential faces must carry zero data for the sine expansion.
  for (std::size_t i = 0; i <= n; ++i) {
    for (double pos : {0.0, 1.0}) {
      const auto q = point(i, pos == 0.0 ? 0 : n);
      if (p.boundary_value({td, pos}, q) != 0.0) {
        throw ConfigError("2D reference solver needs zero data on the tangential faces");
      }
    }
  }

  const std::size_t ni = n - 1;  // interior nodes along each direction
  std::vector<double> work(ni * ni);  // work[(i-1) * ni + (j-1)]
  std::vector<double> g0(n + 1), g1(n + 1);
  for (std::size_t j = 0; j <= n; ++j) {
    g0[j] = p.boundary_value({nd, 0.0}, point(0, j));
    g1[j] = p.boundary_value({nd, 1.0}, point(n, j));
  }
  std::vector<Stencil> st(n + 1);
  for (std::size_t i = 1; i < n; ++i) st[i] = stencil(xn, i, op);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 1; j < n; ++j) {
      double r = op.sign * p.op.forcing_at(point(i, j));
      if (i == 1) r -= st[i].lower * g0[j];
      if (i == n - 1) r -= st[i].upper * g1[j];
      work[(i - 1) * ni + (j - 1)] = r;
    }
  }

  FftwPlan dst(ni);
  auto transform_rows = [&] {
    for (std::size_t i = 0; i < ni; ++i) {
      std::copy_n(work.data() + i * ni, ni, dst.in);
      fftw_execute(dst.plan);
      std::copy_n(dst.out, ni, work.data() + i * ni);
    }
  };
  transform_rows();

  const double pi = 3.14159265358979323846;
  std::vector<double> lo(ni), di(ni), up(ni), col(ni);
  for (std::size_t mode = 1; mode <= ni; ++mode) {
    const double s = std::sin(pi * static_cast<double>(mode) / (2.0 * static_cast<double>(n)));
    const double lambda = 4.0 * s * s / (kt * kt);
    for (std::size_t i = 1; i < n; ++i) {
      lo[i - 1] = i == 1 ? 0.0 : st[i].lower;
      up[i - 1] = i == n - 1 ? 0.0 : st[i].upper;
      di[i - 1] = st[i].diag + op.a * lambda;
      col[i - 1] = work[(i - 1) * ni + (mode - 1)];
    }
    solve_tridiagonal(lo, di, up, col);
    for (std::size_t i = 0; i < ni; ++i) work[i * ni + (mode - 1)] = col[i];
  }

  transform_rows();
  const double scale = 1.0 / (2.0 * static_cast<double>(n));

  GridSolution g = make_grid(p, n, n, "shishkin-upwind-dst", mesh.tau);
  g.x = nd == 0 ? xn : xt;
  g.y = nd == 0 ? xt : xn;
  g.values.assign((n + 1) * (n + 1), 0.0);
  auto set = [&](std::size_t i, std::size_t j, double v) {
    // (i, j) index the normal and tangential directions.
    const std::size_t ix = nd == 0 ? i : j;
    const std::size_t iy = nd == 0 ? j : i;
    g.values[iy * (n + 1) + ix] = v;
  };
  for (std::size_t i = 0; i <= n; ++i) {
    set(i, 0, p.boundary_value({td, 0.0}, point(i, 0)));
    set(i, n, p.boundary_value({td, 1.0}, point(i, n)));
  }
  for (std::size_t j = 0; j <= n; ++j) {
    set(0, j, g0[j]);
    set(n, j, g1[j]);
  }
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 1; j < n; ++j) set(i, j, scale * work[(i - 1) * ni + (j - 1)]);
  }
  check_finite(g.values, "2D reference solve");
  return g;
}

GridSolution solve_parabolic(const problems::ProblemSpec& p, std::size_t n, std::size_t m) {
  if (!p.time_dependent() || !p.initial) throw ConfigError("solve_parabolic needs a time-dependent problem");
  if (m == 0) throw ConfigError("need at least one time step");
  if (p.op.second[0] >= 0.0 || p.op.first[1] <= 0.0 || p.op.second[1] != 0.0) {
    throw ConfigError("parabolic solver needs u_t with positive diffusion in x");
  }
  const Normalized op = normalize(p, 0);
  const double pt = p.op.first[1];
  const ShishkinMesh mesh = normal_mesh(p, op, n);
  const auto& x = mesh.nodes;
  const std::vector<double> t = uniform_nodes(m);
  const double dt = 1.0 / static_cast<double>(m);

  GridSolution g = make_grid(p, n, m, "shishkin-upwind-implicit-euler", mesh.tau);
  g.x = x;
  g.y = t;
  g.values.assign((n + 1) * (m + 1), 0.0);
  auto bc = [&](std::size_t j) {
    return std::pair{p.boundary_value({0, 0.0}, std::vector<double>{0.0, t[j]}),
                     p.boundary_value({0, 1.0}, std::vector<double>{1.0, t[j]})};
  };
  // Corners take the boundary data.
  for (std::size_t i = 1; i < n; ++i) g.values[i] = p.initial->value(std::vector<double>{x[i], 0.0});
  std::tie(g.values[0], g.values[n]) = bc(0);

  const std::size_t k = n - 1;
  std::vector<Stencil> st(n + 1);
  for (std::size_t i = 1; i < n; ++i) st[i] = stencil(x, i, op);
  std::vector<double> lo(k), di(k), up(k), rhs(k);
  for (std::size_t j = 1; j <= m; ++j) {
    const auto [left, right] = bc(j);
    const double* prev = g.values.data() + (j - 1) * (n + 1);
    for (std::size_t i = 1; i < n; ++i) {
      lo[i - 1] = i == 1 ? 0.0 : st[i].lower;
      up[i - 1] = i == n - 1 ? 0.0 : st[i].upper;
      di[i - 1] = st[i].diag + pt / dt;
      rhs[i - 1] = p.op.forcing_at(std::vector<double>{x[i], t[j]}) + pt / dt * prev[i];
    }
    rhs.front() -= st[1].lower * left;
    rhs.back() -= st[n - 1].upper * right;
    solve_tridiagonal(lo, di, up, rhs);
    double* row = g.values.data() + j * (n + 1);
    row[0] = left;
    row[n] = right;
    std::copy(rhs.begin(), rhs.end(), row + 1);
  }
  check_finite(g.values, "parabolic reference solve");
  return g;
}

GridSolution solve_reference(const problems::ProblemSpec& p, std::size_t n, std::size_t m) {
  if (p.input_dim == 1) return solve_steady_1d(p, n);
  if (p.time_dependent()) return solve_parabolic(p, n, m);
  return solve_steady_2d(p, n);
}

double GridSolution::interpolate(std::span<const double> p) const {
  auto locate = [](const std::vector<double>& nodes, double v) {
    auto it = std::upper_bound(nodes.begin(), nodes.end(), v);
    std::size_t hi = static_cast<std::size_t>(it - nodes.begin());
    hi = std::clamp<std::size_t>(hi, 1, nodes.size() - 1);
    const std::size_t lo = hi - 1;
    const double w = (v - nodes[lo]) / (nodes[hi] - nodes[lo]);
    return std::pair{lo, std::clamp(w, 0.0, 1.0)};
  };
  const auto [i, wx] = locate(x, p[0]);
  if (dims() == 1) return (1.0 - wx) * at(i) + wx * at(i + 1);
  const auto [j, wy] = locate(y, p[1]);
  const double lo = (1.0 - wx) * at(i, j) + wx * at(i + 1, j);
  const double hi = (1.0 - wx) * at(i, j + 1) + wx * at(i + 1, j + 1);
  return (1.0 - wy) * lo + wy * hi;
}

std::vector<std::vector<double>> GridSolution::coordinates() const {
  std::vector<std::vector<double>> c(dims());
  const std::size_t ny = y.empty() ? 1 : y.size();
  for (auto& v : c) v.reserve(x.size() * ny);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      c[0].push_back(x[i]);
      if (dims() == 2) c[1].push_back(y[j]);
    }
  }
  return c;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".json");
  return p;
}

std::string sha256_hex(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw LookupError("cannot open " + file.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw NumericError("sha256 unavailable");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::string hex;
  char b[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(b, sizeof b, "%02x", digest[i]);
    hex += b;
  }
  return hex;
}

std::string write_grid(const GridSolution& g, const std::filesystem::path& csv) {
  if (g.coord_names.size() != g.dims()) throw ConfigError("grid coordinate names do not match its shape");
  {
    std::FILE* f = std::fopen(csv.string().c_str(), "wb");
    if (!f) throw ConfigError("cannot write " + csv.string());
    for (const auto& c : g.coord_names) std::fprintf(f, "%s,", c.c_str());
    std::fprintf(f, "u\n");
    const std::size_t ny = g.dims() == 1 ? 1 : g.y.size();
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < g.x.size(); ++i) {
        if (g.dims() == 1) {
          std::fprintf(f, "%.17g,%.17g\n", g.x[i], g.at(i));
        } else {
          std::fprintf(f, "%.17g,%.17g,%.17g\n", g.x[i], g.y[j], g.at(i, j));
        }
      }
    }
    if (std::fclose(f) != 0) throw ConfigError("failed writing " + csv.string());
  }
  const std::string sum = sha256_hex(csv);
  nlohmann::json meta{{"problem", g.problem},
                      {"epsilon", g.epsilon},
                      {"n", g.n},
                      {"m", g.m},
                      {"scheme", g.scheme},
                      {"sigma", 2.0},
                      {"tau", g.tau},
                      {"nx", g.x.size()},
                      {"ny", g.y.size()},
                      {"columns", g.coord_names},
                      {"rows", g.node_count()},
                      {"checksum", "sha256:" + sum}};
  std::ofstream out(sidecar_path(csv));
  out << meta.dump(2) << "\n";
  if (!out) throw ConfigError("cannot write " + sidecar_path(csv).string());
  return sum;
}

GridSolution read_grid(const std::filesystem::path& csv) {
  std::ifstream side(sidecar_path(csv));
  if (!side) throw LookupError("missing grid metadata " + sidecar_path(csv).string());
  nlohmann::json meta;
  try {
    side >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("unreadable grid metadata: " + std::string(e.what()));
  }
  const std::string expected = meta.at("checksum").get<std::string>();
  if (expected != "sha256:" + sha256_hex(csv)) {
    throw NumericError("checksum mismatch for " + csv.string());
  }
  GridSolution g;
  g.problem = meta.at("problem");
  g.epsilon = meta.at("epsilon");
  g.n = meta.at("n");
  g.m = meta.at("m");
  g.scheme = meta.at("scheme");
  g.tau = meta.at("tau");
  g.coord_names = meta.at("columns").get<std::vector<std::string>>();
  const std::size_t nx = meta.at("nx");
  const std::size_t ny = meta.at("ny");
  const std::size_t dims = g.coord_names.size();

  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  const std::size_t rows = nx * std::max<std::size_t>(ny, 1);
  g.values.reserve(rows);
  std::vector<double> cols(dims + 1);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) throw ConfigError("grid file is truncated");
    std::istringstream ss(line);
    std::string cell;
    for (std::size_t c = 0; c <= dims; ++c) {
      if (!std::getline(ss, cell, ',')) throw ConfigError("grid row has too few columns");
      cols[c] = std::strtod(cell.c_str(), nullptr);
    }
    if (r < nx) g.x.push_back(cols[0]);
    if (dims == 2 && r % nx == 0) g.y.push_back(cols[1]);
    g.values.push_back(cols[dims]);
  }
  return g;
}

}  // namespace spinn::fdm
