#include "invmih/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace invmih {

namespace {

std::string fmt(double v, int prec = 4) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

struct Panel {
  double x0, y0, w, h;
  double lo, hi;
  std::string title;
};

}  // namespace

std::vector<SweepPoint> merge_by_secret_count(const std::vector<SweepPoint>& points,
                                              std::vector<std::string>& warnings) {
  std::map<int, SweepPoint> by_n;
  for (const auto& p : points) {
    auto it = by_n.find(p.report.num_secrets);
    if (it != by_n.end()) {
      warnings.push_back("duplicate N=" + std::to_string(p.report.num_secrets) + ": " + p.source + " replaces " +
                         it->second.source);
      it->second = p;
    } else {
      by_n.emplace(p.report.num_secrets, p);
    }
  }
  std::vector<SweepPoint> out;
  for (auto& [n, p] : by_n) out.push_back(p);
  return out;
}

std::string render_sweep_table(const std::vector<SweepPoint>& points) {
  std::ostringstream os;
  os << "N\tgrid\tcover_psnr\tcover_ssim\tsecret_psnr\tsecret_ssim\timage_sets\tnum_params\tsource\n";
  for (const auto& p : points) {
    const auto& r = p.report;
    os << r.num_secrets << '\t' << r.rows << 'x' << r.cols << '\t' << fmt(r.cover_psnr_mean) << '\t'
       << fmt(r.cover_ssim_mean) << '\t' << fmt(r.secret_psnr_mean) << '\t' << fmt(r.secret_ssim_mean) << '\t'
       << r.image_sets << '\t' << r.num_params << '\t' << p.source << '\n';
  }
  return os.str();
}

std::string render_sweep_svg(const std::vector<SweepPoint>& points) {
  const double width = 860, height = 380;
  std::vector<double> ns;
  for (const auto& p : points) ns.push_back(p.report.num_secrets);
  double n_lo = ns.empty() ? 0 : *std::min_element(ns.begin(), ns.end());
  double n_hi = ns.empty() ? 1 : *std::max_element(ns.begin(), ns.end());
  if (n_hi - n_lo < 1) {
    n_lo -= 1;
    n_hi += 1;
  }

  auto range = [&](auto get, double floor_lo, double ceil_hi) {
    double lo = ceil_hi, hi = floor_lo;
    for (const auto& p : points) {
      for (double v : get(p.report)) {
        if (!std::isfinite(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    if (lo > hi) return std::pair{floor_lo, ceil_hi};
    const double pad = std::max((hi - lo) * 0.1, 1e-3);
    return std::pair{std::max(floor_lo, lo - pad), std::min(ceil_hi, hi + pad)};
  };
  const auto psnr_range = range(
      [](const EvalReport& r) { return std::vector<double>{r.cover_psnr_mean, r.secret_psnr_mean}; }, 0.0, 100.0);
  const auto ssim_range = range(
      [](const EvalReport& r) { return std::vector<double>{r.cover_ssim_mean, r.secret_ssim_mean}; }, -1.0, 1.0);

  const Panel panels[2] = {{70, 40, 330, 280, psnr_range.first, psnr_range.second, "PSNR (dB)"},
                           {500, 40, 330, 280, ssim_range.first, ssim_range.second, "SSIM"}};
  const char* colors[2] = {"#1f77b4", "#d62728"};
  const char* labels[2] = {"cover/stego", "secret/recovery"};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int pi = 0; pi < 2; ++pi) {
    const Panel& pn = panels[pi];
    auto px = [&](double n) { return pn.x0 + (n - n_lo) / (n_hi - n_lo) * pn.w; };
    auto py = [&](double v) { return pn.y0 + pn.h - (v - pn.lo) / (pn.hi - pn.lo) * pn.h; };
    os << "<rect x=\"" << pn.x0 << "\" y=\"" << pn.y0 << "\" width=\"" << pn.w << "\" height=\"" << pn.h
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << pn.x0 + pn.w / 2 << "\" y=\"" << pn.y0 - 12 << "\" text-anchor=\"middle\">" << pn.title
       << " vs N</text>\n";
    os << "<text x=\"" << pn.x0 + pn.w / 2 << "\" y=\"" << pn.y0 + pn.h + 36
       << "\" text-anchor=\"middle\">number of secret images N</text>\n";
    for (int t = 0; t <= 4; ++t) {
      const double v = pn.lo + (pn.hi - pn.lo) * t / 4.0;
      os << "<line x1=\"" << pn.x0 - 4 << "\" y1=\"" << py(v) << "\" x2=\"" << pn.x0 << "\" y2=\"" << py(v)
         << "\" stroke=\"black\"/>\n";
      os << "<text x=\"" << pn.x0 - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">"
         << fmt(v, pi == 0 ? 1 : 3) << "</text>\n";
    }
    for (double n : ns) {
      os << "<line x1=\"" << px(n) << "\" y1=\"" << pn.y0 + pn.h << "\" x2=\"" << px(n) << "\" y2=\""
         << pn.y0 + pn.h + 4 << "\" stroke=\"black\"/>\n";
      os << "<text x=\"" << px(n) << "\" y=\"" << pn.y0 + pn.h + 18 << "\" text-anchor=\"middle\">"
         << static_cast<int>(n) << "</text>\n";
    }
    for (int s = 0; s < 2; ++s) {
      std::ostringstream path;
      for (const auto& p : points) {
        const auto& r = p.report;
        const double v = pi == 0 ? (s == 0 ? r.cover_psnr_mean : r.secret_psnr_mean)
                                 : (s == 0 ? r.cover_ssim_mean : r.secret_ssim_mean);
        const double x = px(r.num_secrets);
        if (!std::isfinite(v)) {
          os << "<text x=\"" << x << "\" y=\"" << pn.y0 + 14 + 14 * s << "\" text-anchor=\"middle\" fill=\""
             << colors[s] << "\">inf</text>\n";
          continue;
        }
        path << (path.tellp() > 0 ? " " : "") << x << "," << py(v);
        os << "<circle cx=\"" << x << "\" cy=\"" << py(v) << "\" r=\"3.5\" fill=\"" << colors[s] << "\"/>\n";
      }
      if (path.tellp() > 0) {
        os << "<polyline points=\"" << path.str() << "\" fill=\"none\" stroke=\"" << colors[s]
           << "\" stroke-width=\"1.5\"/>\n";
      }
    }
  }
  for (int s = 0; s < 2; ++s) {
    const double x = 300 + 180 * s;
    os << "<line x1=\"" << x << "\" y1=\"" << height - 12 << "\" x2=\"" << x + 24 << "\" y2=\"" << height - 12
       << "\" stroke=\"" << colors[s] << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << x + 30 << "\" y=\"" << height - 8 << "\">" << labels[s] << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace invmih
