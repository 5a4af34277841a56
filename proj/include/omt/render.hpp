#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "omt/dump.hpp"

namespace omt {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;
};

/// Dark-to-warm map on [0, 1]; values outside are clamped.
std::array<std::uint8_t, 3> colormap(double v);

/// Heatmap of a 1-D or 2-D field (dims = nx). x1 runs left to right, x2 bottom
/// to top; each cell becomes a pixel x pixel block (1-D fields are drawn as a
/// band). Cells with mask > 0 are drawn grey when a mask is given.
Image render_field(const std::vector<std::uint64_t>& dims, const std::vector<double>& values, double lo, double hi,
                   int pixel, const std::vector<double>* mask = nullptr);

/// Binary PPM (P6).
void write_ppm(const std::string& path, const Image& img);

struct RenderOptions {
  enum class Field { rho, u };
  enum class Scale { fixed, automatic };
  Field field = Field::rho;
  Scale scale = Scale::fixed;
  bool obstacle = false;
  int pixel = 0;  // 0 picks about 512 pixels across
  std::string out_dir;  // default: <run dir>/render
};

/// One image per frame of a run directory; returns the written paths.
std::vector<std::string> render_run(const std::string& dir, const RenderOptions& opts);

}  // namespace omt
