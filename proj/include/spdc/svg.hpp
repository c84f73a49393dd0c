#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "spdc/estimator.hpp"
#include "spdc/io.hpp"

namespace spdc {

namespace svgdetail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string rgb(int r, int g, int b) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

// diverging map: negative blue, zero white, positive red
inline std::string diverging_color(double v, double vmax) {
  if (vmax <= 0) return "#ffffff";
  const double t = std::clamp(v / vmax, -1.0, 1.0);
  const int c = static_cast<int>(std::lround(255.0 * (1.0 - std::abs(t))));
  return t >= 0 ? rgb(255, c, c) : rgb(c, c, 255);
}

}  // namespace svgdetail

// Static heatmap of a projection, block-averaged down to a displayable
// grid. Deterministic output (no timestamps).
inline void write_heatmap_svg(const std::string& path, const Projection& proj,
                              const std::string& title, int max_cells = 128) {
  using svgdetail::num;
  const int block = std::max(1, (std::max(proj.rows, proj.cols) + max_cells - 1) / max_cells);
  const int grid_rows = (proj.rows + block - 1) / block;
  const int grid_cols = (proj.cols + block - 1) / block;
  std::vector<double> cells(static_cast<size_t>(grid_rows) * grid_cols, 0.0);
  for (int r = 0; r < proj.rows; ++r)
    for (int c = 0; c < proj.cols; ++c)
      cells[static_cast<size_t>(r / block) * grid_cols + c / block] += proj.at(r, c);
  double vmax = 0;
  for (double v : cells) vmax = std::max(vmax, std::abs(v));

  const double cell_px = std::max(2.0, 512.0 / std::max(grid_rows, grid_cols));
  const double plot_w = cell_px * grid_cols;
  const double plot_h = cell_px * grid_rows;
  const double margin = 60;
  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(plot_w + 2 * margin) +
         "\" height=\"" + num(plot_h + 2 * margin) + "\">\n";
  out += "<text x=\"" + num(margin) + "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">" +
         title + "</text>\n";
  out += "<g transform=\"translate(" + num(margin) + "," + num(margin) + ")\">\n";
  for (int r = 0; r < grid_rows; ++r) {
    for (int c = 0; c < grid_cols; ++c) {
      const double v = cells[static_cast<size_t>(r) * grid_cols + c];
      out += "<rect x=\"" + num(c * cell_px) + "\" y=\"" + num(r * cell_px) + "\" width=\"" +
             num(cell_px + 0.5) + "\" height=\"" + num(cell_px + 0.5) + "\" fill=\"" +
             svgdetail::diverging_color(v, vmax) + "\"/>\n";
    }
  }
  out += "<rect x=\"0\" y=\"0\" width=\"" + num(plot_w) + "\" height=\"" + num(plot_h) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  // crosshair at the zero of the projection variable
  const double cx = (proj.center_col + 0.5) / block * cell_px;
  const double cy = (proj.center_row + 0.5) / block * cell_px;
  out += "<line x1=\"" + num(cx - 8) + "\" y1=\"" + num(cy) + "\" x2=\"" + num(cx + 8) +
         "\" y2=\"" + num(cy) + "\" stroke=\"black\" stroke-width=\"0.7\"/>\n";
  out += "<line x1=\"" + num(cx) + "\" y1=\"" + num(cy - 8) + "\" x2=\"" + num(cx) + "\" y2=\"" +
         num(cy + 8) + "\" stroke=\"black\" stroke-width=\"0.7\"/>\n";
  out += "</g>\n";
  out += "<text x=\"" + num(margin) + "\" y=\"" + num(plot_h + 2 * margin - 18) +
         "\" font-family=\"sans-serif\" font-size=\"12\">axis: " +
         std::string(axis_kind_name(proj.axis_kind)) + ", bin " + num(proj.bin_size) + " " +
         proj.units + ", max|value| " + num(vmax / (block * block)) + " per bin</text>\n";
  out += "</svg>\n";
  iodetail::write_file(path, out);
}

struct SweepSeries {
  std::string label;
  std::string color = "#000000";
  bool circles = true;                            // circles: corrected; crosses: uncorrected
  std::vector<std::array<double, 3>> points;      // waist [um], product [hbar], sigma [hbar]
  double fit_a = 0;                               // plot a/w curve when > 0 (a in um*hbar)
};

// Product-vs-waist figure: both projection variants, fitted a/w curves and
// the 0.5 hbar entanglement bound.
inline void write_sweep_svg(const std::string& path, const std::vector<SweepSeries>& series,
                            const std::string& title) {
  using svgdetail::num;
  double wmin = 1e300, wmax = -1e300, pmax = 0.55;
  for (const auto& s : series)
    for (const auto& pt : s.points) {
      wmin = std::min(wmin, pt[0]);
      wmax = std::max(wmax, pt[0]);
      pmax = std::max(pmax, pt[1] + pt[2]);
    }
  if (wmin > wmax) { wmin = 0; wmax = 1; }
  const double wpad = 0.1 * (wmax - wmin + 1);
  wmin -= wpad;
  wmax += wpad;
  pmax *= 1.1;

  const double width = 640, height = 440, ml = 70, mr = 20, mt = 40, mb = 60;
  const double pw = width - ml - mr, ph = height - mt - mb;
  auto X = [&](double w) { return ml + (w - wmin) / (wmax - wmin) * pw; };
  auto Y = [&](double p) { return mt + (1.0 - p / pmax) * ph; };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
         num(height) + "\">\n";
  out += "<text x=\"" + num(ml) + "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">" +
         title + "</text>\n";
  out += "<rect x=\"" + num(ml) + "\" y=\"" + num(mt) + "\" width=\"" + num(pw) + "\" height=\"" +
         num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";

  // axis ticks
  for (int i = 0; i <= 5; ++i) {
    const double w = wmin + (wmax - wmin) * i / 5.0;
    out += "<line x1=\"" + num(X(w)) + "\" y1=\"" + num(mt + ph) + "\" x2=\"" + num(X(w)) +
           "\" y2=\"" + num(mt + ph + 5) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + num(X(w)) + "\" y=\"" + num(mt + ph + 20) +
           "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" + num(w) +
           "</text>\n";
    const double p = pmax * i / 5.0;
    out += "<line x1=\"" + num(ml - 5) + "\" y1=\"" + num(Y(p)) + "\" x2=\"" + num(ml) +
           "\" y2=\"" + num(Y(p)) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + num(ml - 8) + "\" y=\"" + num(Y(p) + 4) +
           "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" + num(p) +
           "</text>\n";
  }
  out += "<text x=\"" + num(ml + pw / 2) + "\" y=\"" + num(height - 16) +
         "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">pump waist [um]</text>\n";
  out += "<text x=\"18\" y=\"" + num(mt + ph / 2) +
         "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         num(mt + ph / 2) + ")\">product [hbar]</text>\n";

  // entanglement bound
  out += "<line x1=\"" + num(ml) + "\" y1=\"" + num(Y(0.5)) + "\" x2=\"" + num(ml + pw) +
         "\" y2=\"" + num(Y(0.5)) + "\" stroke=\"purple\" stroke-dasharray=\"6,4\"/>\n";
  out += "<text x=\"" + num(ml + pw - 4) + "\" y=\"" + num(Y(0.5) - 6) +
         "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\" fill=\"purple\">0.5 hbar</text>\n";

  int legend_row = 0;
  for (const auto& s : series) {
    if (s.fit_a > 0) {
      std::string pts;
      for (int i = 0; i <= 100; ++i) {
        const double w = wmin + (wmax - wmin) * i / 100.0;
        if (w <= 0) continue;
        const double p = s.fit_a / w;
        if (p > pmax) continue;
        pts += num(X(w)) + "," + num(Y(p)) + " ";
      }
      out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + s.color +
             "\" stroke-width=\"1\" stroke-opacity=\"0.6\"/>\n";
    }
    for (const auto& pt : s.points) {
      const double x = X(pt[0]), y = Y(pt[1]);
      out += "<line x1=\"" + num(x) + "\" y1=\"" + num(Y(pt[1] - pt[2])) + "\" x2=\"" + num(x) +
             "\" y2=\"" + num(Y(pt[1] + pt[2])) + "\" stroke=\"" + s.color + "\"/>\n";
      if (s.circles) {
        out += "<circle cx=\"" + num(x) + "\" cy=\"" + num(y) + "\" r=\"4\" fill=\"" + s.color +
               "\"/>\n";
      } else {
        out += "<line x1=\"" + num(x - 4) + "\" y1=\"" + num(y - 4) + "\" x2=\"" + num(x + 4) +
               "\" y2=\"" + num(y + 4) + "\" stroke=\"" + s.color + "\" stroke-width=\"1.5\"/>\n";
        out += "<line x1=\"" + num(x - 4) + "\" y1=\"" + num(y + 4) + "\" x2=\"" + num(x + 4) +
               "\" y2=\"" + num(y - 4) + "\" stroke=\"" + s.color + "\" stroke-width=\"1.5\"/>\n";
      }
    }
    const double lx = ml + 12, ly = mt + 16 + 16 * legend_row++;
    if (s.circles)
      out += "<circle cx=\"" + num(lx) + "\" cy=\"" + num(ly - 4) + "\" r=\"4\" fill=\"" + s.color + "\"/>\n";
    else {
      out += "<line x1=\"" + num(lx - 4) + "\" y1=\"" + num(ly - 8) + "\" x2=\"" + num(lx + 4) +
             "\" y2=\"" + num(ly) + "\" stroke=\"" + s.color + "\" stroke-width=\"1.5\"/>\n";
      out += "<line x1=\"" + num(lx - 4) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(lx + 4) +
             "\" y2=\"" + num(ly - 8) + "\" stroke=\"" + s.color + "\" stroke-width=\"1.5\"/>\n";
    }
    out += "<text x=\"" + num(lx + 10) + "\" y=\"" + num(ly) +
           "\" font-family=\"sans-serif\" font-size=\"12\">" + s.label + "</text>\n";
  }
  out += "</svg>\n";
  iodetail::write_file(path, out);
}

}  // namespace spdc
