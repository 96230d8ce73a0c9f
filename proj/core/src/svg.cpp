#include "detbench/svg.hpp"

#include <cmath>
#include <cstdio>

#include "detbench/errors.hpp"

namespace detbench {

namespace {

// plot box inside a 640x480 canvas, legend on the right
constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 60, kRight = 470, kTop = 50, kBottom = 430;

std::string fmt(double v, int places = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", places, v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double px(double u) { return kLeft + u * (kRight - kLeft); }
double py(double v) { return kBottom - v * (kBottom - kTop); }

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
constexpr int kPaletteSize = 8;

struct Series {
  double x = 0.0, y = 0.0;
};

Series pick(const CurveSample& s, CurveKind kind) {
  switch (kind) {
    case CurveKind::pr: return {s.recall, s.precision};
    case CurveKind::f1: return {s.confidence_threshold, s.f1};
    case CurveKind::precision: return {s.confidence_threshold, s.precision};
    default: return {s.confidence_threshold, s.recall};
  }
}

const char* title_of(CurveKind kind) {
  switch (kind) {
    case CurveKind::pr: return "Precision-Recall Curve";
    case CurveKind::f1: return "F1-Confidence Curve";
    case CurveKind::precision: return "Precision-Confidence Curve";
    default: return "Recall-Confidence Curve";
  }
}

const char* x_label_of(CurveKind kind) {
  return kind == CurveKind::pr ? "recall" : "confidence threshold";
}

const char* y_label_of(CurveKind kind) {
  switch (kind) {
    case CurveKind::pr: return "precision";
    case CurveKind::f1: return "F1";
    case CurveKind::precision: return "precision";
    default: return "recall";
  }
}

std::string polyline(const std::vector<CurveSample>& samples, CurveKind kind, const char* color,
                     double stroke_width) {
  std::string pts;
  for (const auto& s : samples) {
    const Series v = pick(s, kind);
    if (!pts.empty()) pts += ' ';
    pts += fmt(px(v.x), 1);
    pts += ',';
    pts += fmt(py(v.y), 1);
  }
  return "  <polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"" +
         fmt(stroke_width, 1) + "\" points=\"" + pts + "\"/>\n";
}

// all-class argmax of the plotted y value; ties keep the lowest threshold
std::pair<double, double> argmax_point(const std::vector<CurveSample>& all, CurveKind kind) {
  double best = -1.0, at = 0.0;
  for (const auto& s : all) {
    const Series v = pick(s, kind);
    if (v.y > best) {
      best = v.y;
      at = s.confidence_threshold;
    }
  }
  return {best, at};
}

}  // namespace

std::string render_curve_svg(const SweepCurves& curves, const ClassMap& classes, CurveKind kind) {
  if (curves.all_classes.size() < 2) raise(Errc::too_few_samples, "need at least 2 curve samples");

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth, 0) + "\" height=\"" +
         fmt(kHeight, 0) + "\" viewBox=\"0 0 " + fmt(kWidth, 0) + " " + fmt(kHeight, 0) + "\">\n";
  svg += "  <rect width=\"" + fmt(kWidth, 0) + "\" height=\"" + fmt(kHeight, 0) +
         "\" fill=\"white\"/>\n";
  svg += "  <text x=\"" + fmt((kLeft + kRight) / 2, 1) +
         "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
         std::string(title_of(kind)) + "</text>\n";

  // axes, gridlines, tick labels at 0, 0.2, ..., 1
  for (int i = 0; i <= 5; ++i) {
    const double v = i / 5.0;
    svg += "  <line x1=\"" + fmt(px(v), 1) + "\" y1=\"" + fmt(py(0), 1) + "\" x2=\"" +
           fmt(px(v), 1) + "\" y2=\"" + fmt(py(1), 1) + "\" stroke=\"#dddddd\"/>\n";
    svg += "  <line x1=\"" + fmt(px(0), 1) + "\" y1=\"" + fmt(py(v), 1) + "\" x2=\"" +
           fmt(px(1), 1) + "\" y2=\"" + fmt(py(v), 1) + "\" stroke=\"#dddddd\"/>\n";
    svg += "  <text x=\"" + fmt(px(v), 1) + "\" y=\"" + fmt(py(0) + 18, 1) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + fmt(v, 1) +
           "</text>\n";
    svg += "  <text x=\"" + fmt(px(0) - 8, 1) + "\" y=\"" + fmt(py(v) + 4, 1) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + fmt(v, 1) +
           "</text>\n";
  }
  svg += "  <rect x=\"" + fmt(kLeft, 1) + "\" y=\"" + fmt(kTop, 1) + "\" width=\"" +
         fmt(kRight - kLeft, 1) + "\" height=\"" + fmt(kBottom - kTop, 1) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  svg += "  <text x=\"" + fmt((kLeft + kRight) / 2, 1) + "\" y=\"" + fmt(kHeight - 12, 1) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
         std::string(x_label_of(kind)) + "</text>\n";
  svg += "  <text x=\"16\" y=\"" + fmt((kTop + kBottom) / 2, 1) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 16 " +
         fmt((kTop + kBottom) / 2, 1) + ")\">" + std::string(y_label_of(kind)) + "</text>\n";

  for (std::size_t c = 0; c < curves.per_class.size(); ++c) {
    svg += polyline(curves.per_class[c], kind, kPalette[c % kPaletteSize], 1.0);
  }
  svg += polyline(curves.all_classes, kind, "#000000", 2.0);

  // legend
  double ly = kTop + 10;
  const double lx = kRight + 14;
  for (std::size_t c = 0; c < curves.per_class.size(); ++c) {
    svg += "  <line x1=\"" + fmt(lx, 1) + "\" y1=\"" + fmt(ly, 1) + "\" x2=\"" + fmt(lx + 20, 1) +
           "\" y2=\"" + fmt(ly, 1) + "\" stroke=\"" + kPalette[c % kPaletteSize] +
           "\" stroke-width=\"2\"/>\n";
    svg += "  <text x=\"" + fmt(lx + 26, 1) + "\" y=\"" + fmt(ly + 4, 1) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" +
           escape_xml(classes.name(static_cast<int>(c))) + "</text>\n";
    ly += 18;
  }
  svg += "  <line x1=\"" + fmt(lx, 1) + "\" y1=\"" + fmt(ly, 1) + "\" x2=\"" + fmt(lx + 20, 1) +
         "\" y2=\"" + fmt(ly, 1) + "\" stroke=\"#000000\" stroke-width=\"2\"/>\n";
  svg += "  <text x=\"" + fmt(lx + 26, 1) + "\" y=\"" + fmt(ly + 4, 1) +
         "\" font-family=\"sans-serif\" font-size=\"11\">all</text>\n";

  const auto [best, at] = argmax_point(curves.all_classes, kind);
  svg += "  <text x=\"" + fmt(px(0) + 6, 1) + "\" y=\"" + fmt(py(1) - 8, 1) +
         "\" font-family=\"sans-serif\" font-size=\"12\">all classes " + fmt(best, 2) + " at " +
         fmt(at, 3) + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

std::string render_confusion_svg(const ConfusionMatrix& cm, const ClassMap& classes) {
  if (classes.size() != cm.class_count) {
    raise(Errc::shape_mismatch, "class map does not match confusion matrix");
  }
  const int side = cm.class_count + 1;
  const double cell = 56, margin = 110, pad = 20;
  const double w = margin + side * cell + pad, h = margin + side * cell + pad;
  const auto normalized = cm.normalized();
  const auto label = [&](int i) {
    return i == cm.class_count ? std::string("background") : classes.name(i);
  };
  const auto shade = [](double v) {
    // white -> dark blue
    const int r = static_cast<int>(std::lround(255.0 - v * (255.0 - 8.0)));
    const int g = static_cast<int>(std::lround(255.0 - v * (255.0 - 48.0)));
    const int b = static_cast<int>(std::lround(255.0 - v * (255.0 - 107.0)));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return std::string(buf);
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(w, 0) + "\" height=\"" +
         fmt(h, 0) + "\" viewBox=\"0 0 " + fmt(w, 0) + " " + fmt(h, 0) + "\">\n";
  svg += "  <rect width=\"" + fmt(w, 0) + "\" height=\"" + fmt(h, 0) + "\" fill=\"white\"/>\n";
  svg += "  <text x=\"" + fmt(margin + side * cell / 2, 1) +
         "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"15\">Normalized Confusion Matrix</text>\n";
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const double v = normalized[static_cast<std::size_t>(r * side + c)];
      const double x = margin + c * cell, y = margin + r * cell;
      svg += "  <rect x=\"" + fmt(x, 1) + "\" y=\"" + fmt(y, 1) + "\" width=\"" + fmt(cell, 1) +
             "\" height=\"" + fmt(cell, 1) + "\" fill=\"" + shade(v) +
             "\" stroke=\"#cccccc\"/>\n";
      svg += "  <text x=\"" + fmt(x + cell / 2, 1) + "\" y=\"" + fmt(y + cell / 2 + 4, 1) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" +
             (v > 0.5 ? "white" : "black") + "\">" + fmt(v, 2) + "</text>\n";
    }
  }
  for (int i = 0; i < side; ++i) {
    svg += "  <text x=\"" + fmt(margin - 8, 1) + "\" y=\"" + fmt(margin + i * cell + cell / 2 + 4, 1) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
           escape_xml(label(i)) + "</text>\n";
    svg += "  <text x=\"" + fmt(margin + i * cell + cell / 2, 1) + "\" y=\"" + fmt(margin - 10, 1) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" "
           "transform=\"rotate(-35 " +
           fmt(margin + i * cell + cell / 2, 1) + " " + fmt(margin - 10, 1) + ")\">" +
           escape_xml(label(i)) + "</text>\n";
  }
  svg += "  <text x=\"" + fmt(margin + side * cell / 2, 1) + "\" y=\"" + fmt(h - 6, 1) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">predicted "
         "class</text>\n";
  svg += "  <text x=\"20\" y=\"" + fmt(margin + side * cell / 2, 1) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 20 " +
         fmt(margin + side * cell / 2, 1) + ")\">true class</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace detbench
