#include "dynrec/plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dynrec {

namespace {

constexpr double width = 640.0;
constexpr double height = 400.0;
constexpr double margin = 50.0;

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

class Canvas {
 public:
  Canvas(double x_max, double y_max, std::string title)
      : x_max_(x_max > 0.0 ? x_max : 1.0), y_max_(y_max > 0.0 ? y_max : 1.0) {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width)
         << "\" height=\"" << fmt(height) << "\" viewBox=\"0 0 " << fmt(width) << ' '
         << fmt(height) << "\">\n";
    out_ << "<title>" << title << "</title>\n";
    out_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    axes();
  }

  double x(double t) const { return margin + (width - 2 * margin) * t / x_max_; }
  double y(double v) const {
    return height - margin - (height - 2 * margin) * v / y_max_;
  }

  // Right-continuous step path from t = 0 to x_max.
  void step(const StepFunction& f, const char* css_class, const char* colour) {
    const auto loc = f.locations();
    const auto val = f.values();
    out_ << "<path class=\"" << css_class << "\" data-steps=\"" << f.size()
         << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" d=\"M"
         << fmt(x(0.0)) << ',' << fmt(y(f.initial_value()));
    for (std::size_t i = 0; i < loc.size(); ++i) {
      out_ << " H" << fmt(x(loc[i])) << " V" << fmt(y(val[i]));
    }
    out_ << " H" << fmt(x(x_max_)) << "\"/>\n";
  }

  void raw(const std::string& s) { out_ << s; }

  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

 private:
  void axes() {
    out_ << "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n";
    out_ << "<line x1=\"" << fmt(x(0)) << "\" y1=\"" << fmt(y(0)) << "\" x2=\""
         << fmt(x(x_max_)) << "\" y2=\"" << fmt(y(0)) << "\"/>\n";
    out_ << "<line x1=\"" << fmt(x(0)) << "\" y1=\"" << fmt(y(0)) << "\" x2=\"" << fmt(x(0))
         << "\" y2=\"" << fmt(y(y_max_)) << "\"/>\n";
    out_ << "</g>\n";
    out_ << "<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int i = 0; i <= 4; ++i) {
      const double tx = x_max_ * i / 4.0;
      const double ty = y_max_ * i / 4.0;
      out_ << "<text x=\"" << fmt(x(tx)) << "\" y=\"" << fmt(y(0) + 16)
           << "\" text-anchor=\"middle\">" << format_tick(tx) << "</text>\n";
      out_ << "<text x=\"" << fmt(x(0) - 6) << "\" y=\"" << fmt(y(ty) + 4)
           << "\" text-anchor=\"end\">" << format_tick(ty) << "</text>\n";
    }
    out_ << "</g>\n";
  }

  static std::string format_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
  }

  double x_max_;
  double y_max_;
  std::ostringstream out_;
};

double x_extent(const FitFile& fit) {
  double t = fit.t_star;
  if (!fit.lambda0.empty()) t = std::max(t, fit.lambda0.locations().back());
  for (const BandPoint& b : fit.band) t = std::max(t, b.t);
  return t;
}

}  // namespace

std::string lambda_svg(const FitFile& fit) {
  double y_max = fit.lambda0.empty() ? 0.0 : fit.lambda0.values().back();
  for (const BandPoint& b : fit.band) {
    if (std::isfinite(b.upper)) y_max = std::max(y_max, b.upper);
  }
  Canvas c(x_extent(fit), y_max * 1.05, "cumulative baseline hazard");
  c.step(fit.lambda0, "lambda0", "black");
  std::ostringstream bars;
  bars << "<g class=\"band\" stroke=\"steelblue\" stroke-width=\"1\">\n";
  for (const BandPoint& b : fit.band) {
    bars << "<line data-t=\"" << format_double(b.t) << "\" data-c=\"" << format_double(b.c)
         << "\" data-lower=\"" << format_double(b.lower) << "\" data-upper=\""
         << format_double(b.upper) << "\" x1=\"" << fmt(c.x(b.t)) << "\" y1=\""
         << fmt(c.y(b.lower)) << "\" x2=\"" << fmt(c.x(b.t)) << "\" y2=\""
         << fmt(c.y(std::isfinite(b.upper) ? b.upper : y_max)) << "\"/>\n";
  }
  bars << "</g>\n";
  c.raw(bars.str());
  return c.finish();
}

std::string survivor_svg(const FitFile& fit) {
  Canvas c(x_extent(fit), 1.0, "product-limit survivor estimate");
  c.step(fit.survivor, "survivor", "black");
  return c.finish();
}

std::vector<std::string> emit_plots(const FitFile& fit, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<std::string> paths;
  for (const auto& [name, body] :
       {std::pair{"lambda0.svg", lambda_svg(fit)}, std::pair{"survivor.svg", survivor_svg(fit)}}) {
    const std::string path = (fs::path(out_dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << body;
    paths.push_back(path);
  }
  return paths;
}

}  // namespace dynrec
