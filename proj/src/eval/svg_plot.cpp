#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "deferlab/eval.hpp"

namespace deferlab {
namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 70, kRight = 160, kTop = 40, kBottom = 60;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string render_coverage_svg(std::span<const SvgSeries> series, const std::string& title) {
  double lo = 1.0;
  for (const auto& s : series) {
    for (const auto& p : s.curve.points) lo = std::min(lo, p.system_accuracy);
    lo = std::min(lo, s.operating_accuracy);
  }
  lo = std::max(0.0, std::floor(lo * 10.0) / 10.0);
  if (lo >= 1.0) lo = 0.9;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto X = [&](double c) { return kLeft + c * pw; };
  auto Y = [&](double a) { return kTop + (1.0 - (a - lo) / (1.0 - lo)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
    << "</text>\n";
  o << "<line x1=\"" << num(X(0)) << "\" y1=\"" << num(Y(lo)) << "\" x2=\"" << num(X(1)) << "\" y2=\"" << num(Y(lo))
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << num(X(0)) << "\" y1=\"" << num(Y(lo)) << "\" x2=\"" << num(X(0)) << "\" y2=\"" << num(Y(1))
    << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double c = k / 5.0;
    o << "<line x1=\"" << num(X(c)) << "\" y1=\"" << num(Y(lo)) << "\" x2=\"" << num(X(c)) << "\" y2=\""
      << num(Y(lo) + 5) << "\" stroke=\"black\"/>";
    o << "<text x=\"" << num(X(c)) << "\" y=\"" << num(Y(lo) + 18) << "\" text-anchor=\"middle\">" << num(c)
      << "</text>\n";
    const double a = lo + (1.0 - lo) * c;
    o << "<line x1=\"" << num(X(0) - 5) << "\" y1=\"" << num(Y(a)) << "\" x2=\"" << num(X(0)) << "\" y2=\""
      << num(Y(a)) << "\" stroke=\"black\"/>";
    o << "<text x=\"" << num(X(0) - 8) << "\" y=\"" << num(Y(a) + 4) << "\" text-anchor=\"end\">" << num(a)
      << "</text>\n";
  }
  o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 15)
    << "\" text-anchor=\"middle\">Coverage</text>\n";
  o << "<text transform=\"translate(18," << num(kTop + ph / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">System accuracy</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % std::size(kColors)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : s.curve.points) o << num(X(p.coverage)) << ',' << num(Y(p.system_accuracy)) << ' ';
    o << "\"/>\n";
    o << "<circle cx=\"" << num(X(s.operating_coverage)) << "\" cy=\"" << num(Y(s.operating_accuracy))
      << "\" r=\"5\" fill=\"" << color << "\" stroke=\"black\"/>\n";
    const double ly = kTop + 10 + 20.0 * static_cast<double>(k);
    o << "<line x1=\"" << num(kWidth - kRight + 15) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(kWidth - kRight + 40)
      << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>";
    o << "<text x=\"" << num(kWidth - kRight + 46) << "\" y=\"" << num(ly + 4) << "\">" << escape(s.name)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace deferlab
