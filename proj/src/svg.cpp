#include "degenlab/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "degenlab/common.hpp"

namespace degenlab {

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DomainError("plot: column '" + name + "' missing");
    return static_cast<int>(it - header.begin());
  }
  double num(std::size_t r, int c) const { return std::stod(rows[r][c]); }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

Table read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("plot: cannot open artifact " + path);
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw DomainError("plot: empty artifact " + path);
  t.header = split(line);
  while (std::getline(in, line)) {
    if (!line.empty()) t.rows.push_back(split(line));
  }
  return t;
}

// Fixed-precision numbers keep the output byte-stable.
std::string f(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

class Svg {
 public:
  Svg(double w, double h) : w_(w), h_(h) {}

  void line(double x0, double y0, double x1, double y1, const std::string& style) {
    body_ << "<line x1=\"" << f(x0) << "\" y1=\"" << f(y0) << "\" x2=\"" << f(x1) << "\" y2=\""
          << f(y1) << "\" style=\"" << style << "\"/>\n";
  }
  void polyline(const std::vector<std::array<double, 2>>& pts, const std::string& style) {
    if (pts.empty()) return;
    body_ << "<polyline fill=\"none\" style=\"" << style << "\" points=\"";
    for (const auto& p : pts) body_ << f(p[0]) << ',' << f(p[1]) << ' ';
    body_ << "\"/>\n";
  }
  void rect(double x, double y, double w, double h, const std::string& fill) {
    body_ << "<rect x=\"" << f(x) << "\" y=\"" << f(y) << "\" width=\"" << f(w) << "\" height=\""
          << f(h) << "\" fill=\"" << fill << "\"/>\n";
  }
  void circle(double cx, double cy, double r, const std::string& style) {
    body_ << "<circle cx=\"" << f(cx) << "\" cy=\"" << f(cy) << "\" r=\"" << f(r)
          << "\" fill=\"none\" style=\"" << style << "\"/>\n";
  }
  void text(double x, double y, const std::string& s, int size = 12, const std::string& anchor = "start",
            bool vertical = false) {
    body_ << "<text x=\"" << f(x) << "\" y=\"" << f(y) << "\" font-size=\"" << size
          << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\"";
    if (vertical) body_ << " transform=\"rotate(-90 " << f(x) << ' ' << f(y) << ")\"";
    body_ << ">" << s << "</text>\n";
  }
  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DomainError("plot: cannot write " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f(w_) << "\" height=\"" << f(h_)
        << "\" viewBox=\"0 0 " << f(w_) << ' ' << f(h_) << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body_.str() << "</svg>\n";
  }

 private:
  double w_, h_;
  std::ostringstream body_;
};

// Maps data coordinates to a square plot area with margins.
struct Frame {
  double x0, x1, y0, y1;
  double left = 60, top = 30, size = 480;
  double px(double x) const { return left + (x - x0) / (x1 - x0) * size; }
  double py(double y) const { return top + (y1 - y) / (y1 - y0) * size; }
};

void axes(Svg& svg, const Frame& fr, const std::string& xl, const std::string& yl,
          const std::string& title) {
  svg.rect(fr.left, fr.top, fr.size, 0.5, "black");
  svg.line(fr.left, fr.top, fr.left, fr.top + fr.size, "stroke:black");
  svg.line(fr.left, fr.top + fr.size, fr.left + fr.size, fr.top + fr.size, "stroke:black");
  svg.line(fr.left + fr.size, fr.top, fr.left + fr.size, fr.top + fr.size, "stroke:black");
  for (int i = 0; i <= 4; ++i) {
    const double x = fr.x0 + (fr.x1 - fr.x0) * i / 4.0;
    const double y = fr.y0 + (fr.y1 - fr.y0) * i / 4.0;
    svg.text(fr.px(x), fr.top + fr.size + 16, f(x), 10, "middle");
    svg.text(fr.left - 6, fr.py(y) + 4, f(y), 10, "end");
  }
  svg.text(fr.left + fr.size / 2, fr.top + fr.size + 34, xl, 12, "middle");
  svg.text(18, fr.top + fr.size / 2, yl, 12, "middle", true);
  svg.text(fr.left + fr.size / 2, 18, title, 14, "middle");
}

// Piecewise-linear blue-to-yellow scale on [0, 1].
std::string color(double t) {
  static const std::array<std::array<double, 3>, 5> stops = {{{68, 1, 84},
                                                               {59, 82, 139},
                                                               {33, 145, 140},
                                                               {94, 201, 98},
                                                               {253, 231, 37}}};
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0) * 4.0;
  const int i = std::min(3, static_cast<int>(t));
  const double a = t - i;
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                static_cast<int>(std::lround(stops[i][0] * (1 - a) + stops[i + 1][0] * a)),
                static_cast<int>(std::lround(stops[i][1] * (1 - a) + stops[i + 1][1] * a)),
                static_cast<int>(std::lround(stops[i][2] * (1 - a) + stops[i + 1][2] * a)));
  return buf;
}

const std::map<std::string, std::string>& needs() {
  static const std::map<std::string, std::string> m = {{"sigma_v", "support_csv"},
                                                       {"H_heatmap", "hgrid_csv"},
                                                       {"G_contours", "envelope_grid_csv"},
                                                       {"localization_curves", "localization_csv"}};
  return m;
}

void plot_sigma_v(const Table& t, Svg& svg) {
  Frame fr{-1.6, 1.6, -1.6, 1.6};
  axes(svg, fr, "p1", "p2", "gradient image of v");
  svg.line(fr.px(-1.6), fr.py(-1.6), fr.px(1.6), fr.py(1.6), "stroke:#bbbbbb;stroke-dasharray:4,3");
  svg.line(fr.px(-1.6), fr.py(1.6), fr.px(1.6), fr.py(-1.6), "stroke:#bbbbbb;stroke-dasharray:4,3");
  svg.circle(fr.px(0), fr.py(0), std::sqrt(2.0) / 3.2 * fr.size, "stroke:#bbbbbb;stroke-dasharray:2,3");
  const int ca = t.col("arc"), c1 = t.col("p1"), c2 = t.col("p2"), cs = t.col("theta");
  static const std::array<const char*, 4> colors = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  for (int arc = 0; arc < 4; ++arc) {
    std::vector<std::pair<double, std::array<double, 2>>> pts;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      if (std::stoi(t.rows[r][ca]) != arc) continue;
      pts.push_back({t.num(r, cs), {fr.px(t.num(r, c1)), fr.py(t.num(r, c2))}});
    }
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::array<double, 2>> line;
    const std::size_t stride = std::max<std::size_t>(1, pts.size() / 800);
    for (std::size_t i = 0; i < pts.size(); i += stride) line.push_back(pts[i].second);
    if (!pts.empty()) line.push_back(pts.back().second);
    svg.polyline(line, std::string("stroke:") + colors[arc] + ";stroke-width:2");
  }
}

void plot_h_heatmap(const Table& t, Svg& svg) {
  // The scan is uniform in t = (1 - s)^{1/2}; plot on that grid.
  Frame fr{0.0, 1.0, 0.0, 1.0};
  axes(svg, fr, "(1 - x)^1/2", "(1 - y)^1/2", "H / max((1-x)^1/2, (1-y)^1/2), log colour scale");
  const int cx = t.col("x"), cy = t.col("y"), cr = t.col("ratio");
  std::vector<double> ts;
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    ts.push_back(std::sqrt(std::max(0.0, 1.0 - t.num(r, cx))));
    const double q = t.num(r, cr);
    if (!(q > 0.0)) continue;
    lo = std::min(lo, q);
    hi = std::max(hi, q);
  }
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  const std::size_t n = ts.size();
  if (n < 2) return;
  const std::size_t stride = std::max<std::size_t>(1, n / 150);
  const double cell = fr.size * stride / (n - 1) + 0.5;
  auto index = [&](double v) {
    return static_cast<std::size_t>(std::lower_bound(ts.begin(), ts.end(), v - 1e-12) - ts.begin());
  };
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::size_t i = index(std::sqrt(std::max(0.0, 1.0 - t.num(r, cx))));
    const std::size_t j = index(std::sqrt(std::max(0.0, 1.0 - t.num(r, cy))));
    if (i % stride || j % stride) continue;
    // Logarithmic scale; the ratio grows sharply toward x = y = 1.
    const double u = hi > lo ? std::log(t.num(r, cr) / lo) / std::log(hi / lo) : 0.5;
    svg.rect(fr.px(ts[i]) - cell / 2, fr.py(ts[j]) - cell / 2, cell, cell, color(u));
  }
  svg.text(fr.left + fr.size + 10, fr.top + 12, "max " + f(hi), 10);
  svg.text(fr.left + fr.size + 10, fr.top + fr.size, "min " + f(lo), 10);
}

void plot_g_contours(const Table& t, Svg& svg) {
  const int cx = t.col("x1"), cy = t.col("x2"), cg = t.col("G");
  std::vector<double> xs, ys;
  std::map<std::pair<double, double>, double> val;
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double x = t.num(r, cx), y = t.num(r, cy), g = t.num(r, cg);
    xs.push_back(x);
    ys.push_back(y);
    val[{x, y}] = g;
    lo = std::min(lo, g);
    hi = std::max(hi, g);
  }
  for (auto* v : {&xs, &ys}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }
  if (xs.size() < 2 || ys.size() < 2) return;
  Frame fr{xs.front(), xs.back(), ys.front(), ys.back()};
  axes(svg, fr, "p1", "p2", "level sets of G");
  auto at = [&](std::size_t i, std::size_t j) { return val.at({xs[i], ys[j]}); };
  const int levels = 14;
  for (int l = 1; l <= levels; ++l) {
    const double c = lo + (hi - lo) * l / (levels + 1.0);
    const std::string style = "stroke:" + color(static_cast<double>(l) / levels) + ";stroke-width:1.2";
    // Marching squares, one segment pair per cell.
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
        const std::array<double, 4> v = {at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)};
        const std::array<std::array<double, 2>, 4> p = {{{xs[i], ys[j]},
                                                         {xs[i + 1], ys[j]},
                                                         {xs[i + 1], ys[j + 1]},
                                                         {xs[i], ys[j + 1]}}};
        std::vector<std::array<double, 2>> cut;
        for (int e = 0; e < 4; ++e) {
          const double a = v[e] - c, b = v[(e + 1) % 4] - c;
          if ((a < 0) == (b < 0)) continue;
          const double s = a / (a - b);
          cut.push_back({p[e][0] + s * (p[(e + 1) % 4][0] - p[e][0]),
                         p[e][1] + s * (p[(e + 1) % 4][1] - p[e][1])});
        }
        for (std::size_t k = 0; k + 1 < cut.size(); k += 2) {
          svg.line(fr.px(cut[k][0]), fr.py(cut[k][1]), fr.px(cut[k + 1][0]), fr.py(cut[k + 1][1]), style);
        }
      }
    }
  }
}

void plot_localization(const Table& t, Svg& svg) {
  const int cn = t.col("integrand"), cr = t.col("r"), cd = t.col("diameter");
  std::map<std::string, std::vector<std::array<double, 2>>> curves;
  double dmax = 0.0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    curves[t.rows[r][cn]].push_back({t.num(r, cr), t.num(r, cd)});
    dmax = std::max(dmax, t.num(r, cd));
  }
  const double ytop = std::max(1.5, std::ceil(dmax * 2.0) / 2.0);
  Frame fr{0.0, 0.5, 0.0, ytop};
  axes(svg, fr, "r", "diameter of element gradients in B_r", "localization");
  static const std::array<const char*, 2> colors = {"#d62728", "#1f77b4"};
  int idx = 0;
  for (auto& [name, pts] : curves) {
    std::sort(pts.begin(), pts.end());
    std::vector<std::array<double, 2>> line;
    for (const auto& p : pts) {
      line.push_back({fr.px(p[0]), fr.py(p[1])});
      svg.circle(fr.px(p[0]), fr.py(p[1]), 3, std::string("stroke:") + colors[idx % 2]);
    }
    svg.polyline(line, std::string("stroke:") + colors[idx % 2] + ";stroke-width:2");
    svg.text(fr.left + fr.size - 105, fr.top + 20 + 16 * idx, name, 12);
    svg.line(fr.left + fr.size - 140, fr.top + 16 + 16 * idx, fr.left + fr.size - 110,
             fr.top + 16 + 16 * idx, std::string("stroke:") + colors[idx % 2] + ";stroke-width:2");
    ++idx;
  }
}

}  // namespace

const std::vector<std::string>& plot_kinds() {
  static const std::vector<std::string> k = {"sigma_v", "H_heatmap", "G_contours",
                                             "localization_curves"};
  return k;
}

bool plot_available(const Json& artifacts, const std::string& kind) {
  const auto it = needs().find(kind);
  return it != needs().end() && artifacts.contains(it->second);
}

void write_plot(const Json& artifacts, const std::string& dir, const std::string& kind,
                const std::string& out_path) {
  const auto it = needs().find(kind);
  if (it == needs().end()) throw DomainError("plot: unknown kind '" + kind + "'");
  if (!artifacts.contains(it->second))
    throw DomainError("plot: report has no '" + it->second + "' artifact for kind '" + kind + "'");
  const std::string path =
      (std::filesystem::path(dir) / artifacts.at(it->second).get<std::string>()).string();
  const Table t = read_csv(path);
  Svg svg(600, 570);
  if (kind == "sigma_v") plot_sigma_v(t, svg);
  if (kind == "H_heatmap") plot_h_heatmap(t, svg);
  if (kind == "G_contours") plot_g_contours(t, svg);
  if (kind == "localization_curves") plot_localization(t, svg);
  svg.save(out_path);
}

}  // namespace degenlab
