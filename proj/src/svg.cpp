#include "missinglens/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace missinglens {

namespace {

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Scale {
  double lo = 0, hi = 1;
  double px0 = 0, px1 = 1;
  double operator()(double v) const {
    const double t = (v - lo) / (hi - lo);
    return px0 + t * (px1 - px0);
  }
};

void text(std::ostringstream& out, double x, double y, const std::string& s,
          const char* anchor = "middle", int size = 11) {
  out << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << size
      << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << s << "</text>\n";
}

void line(std::ostringstream& out, double x1, double y1, double x2, double y2, const char* color,
          double width = 1.0, const char* dash = nullptr) {
  out << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\""
      << num(y2) << "\" stroke=\"" << color << "\" stroke-width=\"" << num(width) << "\"";
  if (dash) out << " stroke-dasharray=\"" << dash << "\"";
  out << "/>\n";
}

void rect(std::ostringstream& out, double x, double y, double w, double h, const char* fill,
          double opacity = 1.0) {
  out << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
      << "\" height=\"" << num(h) << "\" fill=\"" << fill << "\" fill-opacity=\"" << num(opacity)
      << "\"/>\n";
}

void step_path(std::ostringstream& out, const std::vector<std::array<double, 3>>& segs,
               const Scale& sx, const Scale& sy, const char* color) {
  if (segs.empty()) return;
  std::ostringstream d;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const double x0 = sx(segs[i][0]), x1 = sx(segs[i][1]), y = sy(segs[i][2]);
    d << (i == 0 ? "M" : "L") << num(x0) << " " << num(y) << " L" << num(x1) << " " << num(y)
      << " ";
  }
  out << "<path d=\"" << d.str() << "\" fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.8\"/>\n";
}

}  // namespace

std::string shape_svg(const ShapeFunction& shape, const SvgOptions& options) {
  const BinLayout& layout = shape.layout;
  const double W = options.width, H = options.height;
  const double margin = 46;
  const double density_h = 52;
  const double plot_bottom = H - margin - density_h;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\""
      << options.height << "\" viewBox=\"0 0 " << options.width << " " << options.height
      << "\">\n";
  rect(out, 0, 0, W, H, "#ffffff");

  std::vector<std::array<double, 3>> segs;  // lo, hi, score
  double score_lo = 0, score_hi = 0;
  double count_max = 1;
  const bool categorical = layout.categorical;
  double x_lo = 0, x_hi = 1;

  if (categorical) {
    const int nb = layout.n_bins();
    x_lo = 0;
    x_hi = nb;
    for (int b = 0; b < nb; ++b) segs.push_back({static_cast<double>(b), static_cast<double>(b + 1), shape.scores[b]});
  } else {
    const int nv = static_cast<int>(layout.edges.size()) - 1;
    x_lo = layout.edges[0];
    x_hi = layout.edges[nv];
    for (int b = 0; b < nv; ++b) segs.push_back({layout.edges[b], layout.edges[b + 1], shape.scores[b]});
    if (layout.separation_offset) {
      const int ni = static_cast<int>(layout.imputed_edges.size()) - 1;
      for (int b = 0; b < ni; ++b)
        segs.push_back({layout.imputed_edges[b] + *layout.separation_offset,
                        layout.imputed_edges[b + 1] + *layout.separation_offset,
                        shape.scores[nv + b]});
      x_hi = segs.back()[1];
    }
  }
  for (const auto& s : segs) {
    score_lo = std::min(score_lo, s[2]);
    score_hi = std::max(score_hi, s[2]);
  }
  if (layout.missing_bin) {
    score_lo = std::min(score_lo, shape.scores[*layout.missing_bin]);
    score_hi = std::max(score_hi, shape.scores[*layout.missing_bin]);
  }
  for (Eigen::Index b = 0; b < layout.counts.size(); ++b)
    count_max = std::max(count_max, layout.counts[b]);
  if (score_hi - score_lo < 1e-9) {
    score_lo -= 0.5;
    score_hi += 0.5;
  }
  const double pad = 0.08 * (score_hi - score_lo);
  score_lo -= pad;
  score_hi += pad;

  // the missing bin gets a reserved band on the left
  const double miss_band = layout.missing_bin ? 56.0 : 0.0;
  Scale sx{x_lo, x_hi, margin + miss_band, W - 14};
  Scale sy{score_lo, score_hi, plot_bottom, margin};  // inverted y

  // axes
  line(out, margin + miss_band, margin, margin + miss_band, plot_bottom, "#444444");
  line(out, margin + miss_band, plot_bottom, W - 14, plot_bottom, "#444444");
  if (score_lo < 0 && score_hi > 0)
    line(out, margin + miss_band, sy(0), W - 14, sy(0), "#bbbbbb", 1.0, "4,3");
  text(out, margin + miss_band, margin - 8, num(score_hi), "middle", 10);
  text(out, margin + miss_band - 4, plot_bottom + 12, num(x_lo), "start", 10);
  text(out, W - 14, plot_bottom + 12, num(x_hi), "end", 10);

  // highlighted bins (audit flags)
  for (int b : options.highlight_bins) {
    if (categorical || b < 0 || b >= static_cast<int>(segs.size())) continue;
    rect(out, sx(segs[static_cast<std::size_t>(b)][0]), margin,
         sx(segs[static_cast<std::size_t>(b)][1]) - sx(segs[static_cast<std::size_t>(b)][0]),
         plot_bottom - margin, "#ffd480", 0.5);
  }

  step_path(out, segs, sx, sy, "#1f5fbf");

  // density strip
  const double strip_top = plot_bottom + 18;
  for (std::size_t b = 0; b < segs.size(); ++b) {
    const double c = b < static_cast<std::size_t>(layout.counts.size()) ? layout.counts[static_cast<Eigen::Index>(b)] : 0;
    const double h = density_h * 0.8 * (c / count_max);
    rect(out, sx(segs[b][0]), strip_top + (density_h * 0.8 - h),
         std::max(1.0, sx(segs[b][1]) - sx(segs[b][0]) - 0.5), h, "#9ab7d8");
  }

  // detached missing-bin segment
  if (layout.missing_bin) {
    const double y = sy(shape.scores[*layout.missing_bin]);
    line(out, margin + 6, y, margin + miss_band - 10, y, "#c23b22", 2.2);
    text(out, margin + 6, plot_bottom + 12, "missing", "start", 9);
    const double c = layout.counts[*layout.missing_bin];
    const double h = density_h * 0.8 * (c / count_max);
    rect(out, margin + 6, strip_top + (density_h * 0.8 - h), miss_band - 16, h, "#d8a49a");
  }

  if (options.mean_line && !categorical) {
    const double x = sx(*options.mean_line);
    line(out, x, margin, x, plot_bottom, "#c23b22", 1.6);
    text(out, x, margin - 8, "mean", "middle", 9);
  }

  const std::string title = options.title.empty() ? shape.feature : options.title;
  text(out, W / 2, 18, title, "middle", 13);
  out << "</svg>\n";
  return out.str();
}

std::string separated_shape_svg(const SeparatedShapeCurves& curves, const std::string& title) {
  const double W = 720, H = 420, margin = 46;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  rect(out, 0, 0, W, H, "#ffffff");

  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 0;
  bool first = true;
  auto extend = [&](const std::vector<ShapeSegment>& segs) {
    for (const auto& s : segs) {
      if (first) {
        x_lo = s.lo;
        x_hi = s.hi;
        first = false;
      }
      x_lo = std::min(x_lo, s.lo);
      x_hi = std::max(x_hi, s.hi);
      y_lo = std::min(y_lo, s.score);
      y_hi = std::max(y_hi, s.score);
    }
  };
  extend(curves.observed);
  extend(curves.imputed);
  if (y_hi - y_lo < 1e-9) {
    y_lo -= 0.5;
    y_hi += 0.5;
  }
  const double pad = 0.08 * (y_hi - y_lo);
  y_lo -= pad;
  y_hi += pad;

  Scale sx{x_lo, x_hi, margin, W - 14};
  Scale sy{y_lo, y_hi, H - margin, margin};

  line(out, margin, margin, margin, H - margin, "#444444");
  line(out, margin, H - margin, W - 14, H - margin, "#444444");
  if (y_lo < 0 && y_hi > 0) line(out, margin, sy(0), W - 14, sy(0), "#bbbbbb", 1.0, "4,3");

  auto draw = [&](const std::vector<ShapeSegment>& segs, const char* color) {
    std::vector<std::array<double, 3>> path;
    for (const auto& s : segs) path.push_back({s.lo, s.hi, s.score});
    step_path(out, path, sx, sy, color);
  };
  draw(curves.observed, "#1f5fbf");
  draw(curves.imputed, "#e07b39");

  text(out, W - 18, margin + 12, "observed", "end", 11);
  rect(out, W - 96, margin + 4, 10, 10, "#1f5fbf");
  text(out, W - 18, margin + 28, "imputed", "end", 11);
  rect(out, W - 96, margin + 20, 10, 10, "#e07b39");
  if (!title.empty()) text(out, W / 2, 18, title, "middle", 13);
  out << "</svg>\n";
  return out.str();
}

}  // namespace missinglens
