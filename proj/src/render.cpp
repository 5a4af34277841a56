#include "omt/render.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "omt/errors.hpp"
#include "omt/run_io.hpp"

namespace omt {

std::array<std::uint8_t, 3> colormap(double v) {
  static const double stops[5][3] = {
      {0, 0, 4}, {87, 16, 110}, {188, 55, 84}, {249, 142, 9}, {252, 255, 164}};
  if (!std::isfinite(v)) v = 0.0;
  const double s = std::clamp(v, 0.0, 1.0) * 4.0;
  const int i = std::min(static_cast<int>(s), 3);
  const double w = s - i;
  std::array<std::uint8_t, 3> out{};
  for (int c = 0; c < 3; ++c)
    out[c] = static_cast<std::uint8_t>(std::lround((1.0 - w) * stops[i][c] + w * stops[i + 1][c]));
  return out;
}

Image render_field(const std::vector<std::uint64_t>& dims, const std::vector<double>& values, double lo, double hi,
                   int pixel, const std::vector<double>* mask) {
  if (dims.empty() || dims.size() > 2) throw FormatError("only 1-D and 2-D fields can be rendered");
  const int nx = static_cast<int>(dims[0]);
  const int ny = dims.size() == 2 ? static_cast<int>(dims[1]) : 1;
  if (values.size() != static_cast<std::size_t>(nx) * ny) throw FormatError("field size does not match dims");
  pixel = std::max(pixel, 1);
  Image img;
  img.width = nx * pixel;
  img.height = dims.size() == 2 ? ny * pixel : std::max(pixel, 32);
  img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  const double span = hi > lo ? hi - lo : 1.0;
  for (int py = 0; py < img.height; ++py) {
    const int j = dims.size() == 2 ? ny - 1 - py / pixel : 0;
    for (int px = 0; px < img.width; ++px) {
      const int i = px / pixel;
      // Row-major storage: the last axis is contiguous.
      const std::size_t k = static_cast<std::size_t>(i) * ny + j;
      std::array<std::uint8_t, 3> c{128, 128, 128};
      if (!(mask && (*mask)[k] > 0.0)) c = colormap((values[k] - lo) / span);
      std::copy(c.begin(), c.end(), img.rgb.begin() + (static_cast<std::size_t>(py) * img.width + px) * 3);
    }
  }
  return img;
}

void write_ppm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
}

namespace {

namespace fs = std::filesystem;

// Scalar frame: rho as stored, u as the Euclidean norm over its components.
FieldDump scalar_frame(const std::string& path, RenderOptions::Field field) {
  FieldDump d = read_dump(path);
  if (field == RenderOptions::Field::rho) return d;
  if (d.dims.size() < 2) throw FormatError(path + ": control dump needs a component axis");
  const std::size_t r = d.dims[0], n = d.data.size() / r;
  FieldDump out{{d.dims.begin() + 1, d.dims.end()}, std::vector<double>(n, 0.0)};
  for (std::size_t c = 0; c < r; ++c)
    for (std::size_t k = 0; k < n; ++k) out.data[k] += d.data[c * n + k] * d.data[c * n + k];
  for (double& v : out.data) v = std::sqrt(v);
  return out;
}

}  // namespace

std::vector<std::string> render_run(const std::string& dir, const RenderOptions& opts) {
  const RunManifest m = read_manifest(dir);
  const bool is_rho = opts.field == RenderOptions::Field::rho;
  std::vector<FieldDump> frames;
  for (const FrameFiles& f : m.frames) frames.push_back(scalar_frame((fs::path(dir) / (is_rho ? f.rho : f.u)).string(), opts.field));
  if (frames.empty()) throw FormatError(dir + ": run has no frames");

  std::vector<double> mask;
  if (opts.obstacle) {
    const FieldDump md = read_dump((fs::path(dir) / m.obstacle).string());
    if (md.dims != frames[0].dims) throw FormatError(dir + ": obstacle mask does not match the frames");
    mask = md.data;
  }
  double global = 0.0;
  for (const FieldDump& f : frames)
    for (double v : f.data) global = std::max(global, v);
  const fs::path out_dir = opts.out_dir.empty() ? fs::path(dir) / "render" : fs::path(opts.out_dir);
  fs::create_directories(out_dir);
  const std::uint64_t widest = *std::max_element(frames[0].dims.begin(), frames[0].dims.end());
  const int pixel = opts.pixel > 0 ? opts.pixel : std::max(1, static_cast<int>(512 / widest));

  std::vector<std::string> written;
  for (std::size_t j = 0; j < frames.size(); ++j) {
    double hi = global;
    if (opts.scale == RenderOptions::Scale::automatic) {
      hi = 0.0;
      for (double v : frames[j].data) hi = std::max(hi, v);
    }
    const Image img = render_field(frames[j].dims, frames[j].data, 0.0, hi, pixel, opts.obstacle ? &mask : nullptr);
    char name[64];
    std::snprintf(name, sizeof name, "%s_%03zu.ppm", is_rho ? "rho" : "u", j);
    const std::string path = (out_dir / name).string();
    write_ppm(path, img);
    written.push_back(path);
  }
  return written;
}

}  // namespace omt
