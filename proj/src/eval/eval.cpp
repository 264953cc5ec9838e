#include "spinn/eval/eval.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "spinn/error.hpp"
#include "spinn/models/batched_model.hpp"
#include "spinn/networks/batched.hpp"

namespace spinn::eval {

namespace fs = std::filesystem;

double relative_l2(std::span<const double> predicted, std::span<const double> truth) {
  if (truth.empty()) throw EvalError("relative L2 needs at least one point");
  if (predicted.size() != truth.size()) {
    throw EvalError("relative L2 needs equal lengths (" + std::to_string(predicted.size()) +
                    " vs " + std::to_string(truth.size()) + ")");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = predicted[i] - truth[i];
    num += d * d;
    den += truth[i] * truth[i];
  }
  if (den == 0.0) throw EvalError("relative L2 is undefined for an all-zero truth");
  return std::sqrt(num / den);
}

fdm::GridSolution analytic_test_set(const problems::ProblemSpec& p, std::size_t n) {
  if (!p.has_exact() || p.input_dim != 1) {
    throw ConfigError(p.name + " has no closed-form solution; use a finite-difference test set");
  }
  const auto& prior = p.priors.front();
  const auto mesh = fdm::shishkin_mesh(n, p.epsilon, prior.decay, prior.position > 0.5);
  fdm::GridSolution g;
  g.problem = p.name;
  g.epsilon = p.epsilon;
  g.n = n;
  g.scheme = "analytic";
  g.tau = mesh.tau;
  g.coord_names = p.coord_names;
  g.x = mesh.nodes;
  g.values.reserve(g.x.size());
  for (double x : g.x) g.values.push_back(p.exact(x));
  return g;
}

std::string test_set_name(const problems::ProblemSpec& p, std::size_t n, std::size_t m) {
  char eps[32];
  std::snprintf(eps, sizeof eps, "%g", p.epsilon);
  return p.name + "_eps" + eps + "_n" + std::to_string(n) + "_m" + std::to_string(m) + ".csv";
}

fdm::GridSolution load_test_set(const fs::path& csv, const problems::ProblemSpec& p) {
  if (!fs::exists(csv)) {
    char eps[32];
    std::snprintf(eps, sizeof eps, "%g", p.epsilon);
    throw LookupError("test set " + csv.string() + " not found; generate it with `spinn reference " +
                      p.name + " --epsilon " + eps + "`");
  }
  auto g = fdm::read_grid(csv);
  if (g.problem != p.name || g.epsilon != p.epsilon) {
    throw ConfigError("test set " + csv.string() + " belongs to " + g.problem +
                      " at epsilon " + std::to_string(g.epsilon));
  }
  return g;
}

ErrorField evaluate(const BatchPredictor& predict, const fdm::GridSolution& test) {
  ErrorField f;
  f.coord_names = test.coord_names;
  f.coords = test.coordinates();
  f.truth = test.values;
  f.nx = test.x.size();
  f.ny = test.dims() == 1 ? 1 : test.y.size();
  networks::Matrix c;
  c.resize(f.coords.size(), f.truth.size());
  for (std::size_t d = 0; d < f.coords.size(); ++d) std::copy(f.coords[d].begin(), f.coords[d].end(), c.row(d));
  f.prediction = predict(c.view());
  if (f.prediction.size() != f.truth.size()) throw EvalError("predictor returned the wrong number of values");
  f.error.resize(f.truth.size());
  for (std::size_t i = 0; i < f.truth.size(); ++i) f.error[i] = f.prediction[i] - f.truth[i];
  return f;
}

ErrorField evaluate(const models::Model& model, std::span<const double> params,
                    const fdm::GridSolution& test) {
  if (model.input_dim() != test.dims()) throw ConfigError("model and test set dimensions differ");
  return evaluate([&](simd::ConstMatrixView c) { return models::predict_batch(model, params, c); },
                  test);
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j{{"problem", r.problem},
                   {"model", r.model},
                   {"backbone", r.backbone},
                   {"epsilon", r.epsilon},
                   {"relative_l2", r.relative_l2},
                   {"wall_seconds", r.wall_seconds},
                   {"iterations", r.iterations},
                   {"seed", r.seed},
                   {"test_set", r.test_set},
                   {"error_field", r.error_field},
                   {"files", r.files},
                   {"config", r.config}};
  if (!r.abort_reason.empty()) j["abort_reason"] = r.abort_reason;
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.problem = j.at("problem");
    r.model = j.at("model");
    r.backbone = j.at("backbone");
    r.epsilon = j.at("epsilon");
    r.relative_l2 = j.at("relative_l2");
    r.wall_seconds = j.at("wall_seconds");
    r.iterations = j.at("iterations");
    r.seed = j.at("seed");
    r.test_set = j.value("test_set", "");
    r.error_field = j.value("error_field", "");
    r.abort_reason = j.value("abort_reason", "");
    r.files = j.value("files", std::vector<std::string>{});
    r.config = j.value("config", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
  return r;
}

void write_report(const EvalReport& r, const fs::path& path) {
  std::ofstream out(path);
  out << to_json(r).dump(2) << "\n";
  if (!out) throw ConfigError("cannot write " + path.string());
}

EvalReport read_report(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("no report at " + path.string());
  try {
    return report_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("unreadable report " + path.string() + ": " + e.what());
  }
}

void write_field_csv(const ErrorField& f, const fs::path& path) {
  std::FILE* out = std::fopen(path.string().c_str(), "wb");
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const auto& c : f.coord_names) std::fprintf(out, "%s,", c.c_str());
  std::fprintf(out, "truth,prediction,error\n");
  for (std::size_t i = 0; i < f.size(); ++i) {
    for (const auto& c : f.coords) std::fprintf(out, "%.17g,", c[i]);
    std::fprintf(out, "%.17g,%.17g,%.17g\n", f.truth[i], f.prediction[i], f.error[i]);
  }
  if (std::fclose(out) != 0) throw ConfigError("failed writing " + path.string());
}

ErrorField read_field_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("no field file at " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 4) throw ConfigError("field file header is too short");
  ErrorField f;
  const std::size_t dims = header.size() - 3;
  f.coord_names.assign(header.begin(), header.begin() + static_cast<std::ptrdiff_t>(dims));
  f.coords.resize(dims);
  std::vector<double> row(header.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    for (double& v : row) {
      if (!std::getline(ss, cell, ',')) throw ConfigError("field row has too few columns");
      v = std::strtod(cell.c_str(), nullptr);
    }
    for (std::size_t d = 0; d < dims; ++d) f.coords[d].push_back(row[d]);
    f.truth.push_back(row[dims]);
    f.prediction.push_back(row[dims + 1]);
    f.error.push_back(row[dims + 2]);
  }
  f.nx = f.size();
  f.ny = 1;
  if (dims == 2 && f.size() > 0) {
    const auto& y = f.coords[1];
    f.nx = static_cast<std::size_t>(std::find_if(y.begin(), y.end(), [&](double v) { return v != y[0]; }) - y.begin());
    f.ny = f.nx ? f.size() / f.nx : 0;
  }
  return f;
}

namespace {

std::array<unsigned char, 3> colormap(double t) {
  static constexpr std::array<std::array<double, 3>, 5> stops{{{68, 1, 84},
                                                               {59, 82, 139},
                                                               {33, 145, 140},
                                                               {94, 201, 98},
                                                               {253, 231, 37}}};
  t = std::isfinite(t) ? std::clamp(t, 0.0, 1.0) : 0.0;
  const double s = t * (stops.size() - 1);
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(s), stops.size() - 2);
  const double w = s - static_cast<double>(k);
  std::array<unsigned char, 3> c{};
  for (std::size_t i = 0; i < 3; ++i) {
    c[i] = static_cast<unsigned char>(std::lround((1.0 - w) * stops[k][i] + w * stops[k + 1][i]));
  }
  return c;
}

std::string base64(const std::vector<unsigned char>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::pair<double, double> finite_range(std::span<const double> v) {
  double lo = INFINITY, hi = -INFINITY;
  for (double x : v) {
    if (!std::isfinite(x)) continue;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (!(lo <= hi)) return {0.0, 1.0};
  if (lo == hi) return {lo - 0.5, hi + 0.5};
  return {lo, hi};
}

std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.4g", v);
  return b;
}

constexpr double kW = 640, kH = 400, kL = 70, kR = 20, kT = 40, kB = 50;

void write_text(const fs::path& path, const std::string& s) {
  std::ofstream out(path, std::ios::binary);
  out << s;
  if (!out) throw ConfigError("cannot write " + path.string());
}

void axes(std::ostringstream& s, double x0, double x1, double y0, double y1, const std::string& xl,
          const std::string& yl) {
  s << "<rect x='" << kL << "' y='" << kT << "' width='" << kW - kL - kR << "' height='"
    << kH - kT - kB << "' fill='none' stroke='black'/>\n";
  s << "<text x='" << kL << "' y='" << kH - kB + 18 << "' text-anchor='middle'>" << fmt(x0) << "</text>\n";
  s << "<text x='" << kW - kR << "' y='" << kH - kB + 18 << "' text-anchor='middle'>" << fmt(x1) << "</text>\n";
  s << "<text x='" << kL - 6 << "' y='" << kH - kB << "' text-anchor='end'>" << fmt(y0) << "</text>\n";
  s << "<text x='" << kL - 6 << "' y='" << kT + 10 << "' text-anchor='end'>" << fmt(y1) << "</text>\n";
  s << "<text x='" << (kL + kW - kR) / 2 << "' y='" << kH - 12 << "' text-anchor='middle'>" << xl << "</text>\n";
  s << "<text x='16' y='" << (kT + kH - kB) / 2 << "' text-anchor='middle' transform='rotate(-90 16 "
    << (kT + kH - kB) / 2 << ")'>" << yl << "</text>\n";
}

std::string polyline(std::span<const double> xs, std::span<const double> ys, double x0, double x1,
                     double y0, double y1, const char* color) {
  std::ostringstream s;
  s << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(ys[i])) continue;
    const double px = kL + (xs[i] - x0) / (x1 - x0) * (kW - kL - kR);
    const double py = kH - kB - (ys[i] - y0) / (y1 - y0) * (kH - kT - kB);
    s << fmt(px) << ',' << fmt(py) << ' ';
  }
  s << "'/>\n";
  return s.str();
}

}  // namespace

std::vector<unsigned char> heatmap_png(std::span<const double> values, std::size_t nx,
                                       std::size_t ny) {
  if (values.size() != nx * ny || nx == 0) throw ConfigError("heatmap size does not match its grid");
  const auto [lo, hi] = finite_range(values);
  std::vector<unsigned char> rows(nx * ny * 3);
  for (std::size_t j = 0; j < ny; ++j) {
    unsigned char* dst = rows.data() + (ny - 1 - j) * nx * 3;
    for (std::size_t i = 0; i < nx; ++i) {
      const auto c = colormap((values[j * nx + i] - lo) / (hi - lo));
      std::copy(c.begin(), c.end(), dst + 3 * i);
    }
  }

  std::vector<unsigned char> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw ConfigError("cannot allocate a PNG encoder");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ConfigError("PNG encoding failed");
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t n) {
        auto* v = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(p));
        v->insert(v->end(), data, data + n);
      },
      nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(nx), static_cast<png_uint_32>(ny), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t j = 0; j < ny; ++j) png_write_row(png, rows.data() + j * nx * 3);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_solution_svg(const ErrorField& f, const std::string& title, const fs::path& path) {
  std::ostringstream s;
  if (f.coords.size() == 1) {
    const auto& x = f.coords[0];
    const auto [x0, x1] = finite_range(x);
    auto [y0, y1] = finite_range(f.truth);
    const auto [p0, p1] = finite_range(f.prediction);
    y0 = std::min(y0, p0);
    y1 = std::max(y1, p1);
    s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH
      << "' font-family='sans-serif' font-size='12'>\n";
    s << "<text x='" << kW / 2 << "' y='20' text-anchor='middle'>" << title << "</text>\n";
    axes(s, x0, x1, y0, y1, f.coord_names[0], "u");
    s << polyline(x, f.truth, x0, x1, y0, y1, "black");
    s << polyline(x, f.prediction, x0, x1, y0, y1, "#d62728");
    s << "<text x='" << kW - kR - 4 << "' y='" << kT + 16 << "' text-anchor='end'>truth (black), prediction (red)</text>\n";
    s << "</svg>\n";
  } else {
    std::vector<double> abs_err(f.error.size());
    std::transform(f.error.begin(), f.error.end(), abs_err.begin(), [](double e) { return std::abs(e); });
    constexpr double kPanel = 300, kGap = 60, kTop = 40;
    s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << 2 * kPanel + 3 * kGap << "' height='"
      << kPanel + kTop + 50 << "' font-family='sans-serif' font-size='12'>\n";
    s << "<text x='" << kPanel + 1.5 * kGap << "' y='18' text-anchor='middle'>" << title << "</text>\n";
    const std::array<std::pair<const char*, const std::vector<double>*>, 2> panels{
        {{"prediction", &f.prediction}, {"|error|", &abs_err}}};
    for (std::size_t k = 0; k < panels.size(); ++k) {
      const double x = kGap + static_cast<double>(k) * (kPanel + kGap);
      const auto [lo, hi] = finite_range(*panels[k].second);
      s << "<text x='" << x + kPanel / 2 << "' y='" << kTop - 6 << "' text-anchor='middle'>"
        << panels[k].first << " [" << fmt(lo) << ", " << fmt(hi) << "]</text>\n";
      s << "<image x='" << x << "' y='" << kTop << "' width='" << kPanel << "' height='" << kPanel
        << "' data-nx='" << f.nx << "' data-ny='" << f.ny
        << "' preserveAspectRatio='none' style='image-rendering:pixelated' href='data:image/png;base64,"
        << base64(heatmap_png(*panels[k].second, f.nx, f.ny)) << "'/>\n";
      s << "<text x='" << x + kPanel / 2 << "' y='" << kTop + kPanel + 18 << "' text-anchor='middle'>"
        << f.coord_names[0] << "</text>\n";
      s << "<text x='" << x - 8 << "' y='" << kTop + kPanel / 2 << "' text-anchor='end'>"
        << f.coord_names[1] << "</text>\n";
    }
    s << "</svg>\n";
  }
  write_text(path, s.str());
}

void write_loss_svg(std::span<const training::LossRecord> history, std::size_t iterations,
                    const fs::path& path) {
  const double x1 = std::max<double>(static_cast<double>(iterations), 1.0);
  std::array<std::vector<double>, 4> series;
  std::vector<double> xs;
  for (const auto& h : history) {
    xs.push_back(static_cast<double>(h.iteration));
    const std::array<double, 4> v{h.loss.total, h.loss.r, h.loss.bc, h.loss.ic};
    for (std::size_t k = 0; k < 4; ++k) series[k].push_back(v[k] > 0.0 ? std::log10(v[k]) : NAN);
  }
  double y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    const auto [a, b] = finite_range(s);
    if (std::any_of(s.begin(), s.end(), [](double v) { return std::isfinite(v); })) {
      y0 = std::min(y0, a);
      y1 = std::max(y1, b);
    }
  }
  if (!(y0 <= y1)) y0 = -1, y1 = 0;
  if (y0 == y1) y0 -= 0.5, y1 += 0.5;
  std::ostringstream s;
  s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH
    << "' font-family='sans-serif' font-size='12' data-x-min='0' data-x-max='" << iterations << "'>\n";
  s << "<text x='" << kW / 2 << "' y='20' text-anchor='middle'>training loss</text>\n";
  axes(s, 0.0, x1, y0, y1, "iteration", "log10 loss");
  static constexpr std::array<const char*, 4> colors{"black", "#1f77b4", "#d62728", "#2ca02c"};
  static constexpr std::array<const char*, 4> names{"total", "residual", "boundary", "initial"};
  for (std::size_t k = 0; k < 4; ++k) {
    if (std::none_of(series[k].begin(), series[k].end(), [](double v) { return std::isfinite(v); })) continue;
    s << polyline(xs, series[k], 0.0, x1, y0, y1, colors[k]);
    s << "<text x='" << kW - kR - 4 << "' y='" << kT + 16 + 14 * static_cast<double>(k)
      << "' text-anchor='end' fill='" << colors[k] << "'>" << names[k] << "</text>\n";
  }
  s << "</svg>\n";
  write_text(path, s.str());
}

PlotFiles export_plots(const EvalReport& report, const ErrorField& field,
                       std::span<const training::LossRecord> history, const fs::path& dir) {
  PlotFiles p{dir / "field.csv", dir / "solution.svg", dir / "loss.svg"};
  write_field_csv(field, p.field);
  char rel[32];
  std::snprintf(rel, sizeof rel, "%.3e", report.relative_l2);
  write_solution_svg(field, report.problem + " " + report.model + "/" + report.backbone +
                                "  relative L2 " + rel,
                     p.solution);
  write_loss_svg(history, report.iterations, p.loss);
  return p;
}

}  // namespace spinn::eval
