#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fontid/dataset.hpp"
#include "fontid/error.hpp"
#include "fontid/harness.hpp"

namespace fontid {

inline constexpr const char* kCurveCsvHeader =
    "strategy,repetition,seed,labeled_count,accuracy,recall_blackletter,recall_roman,recall_mixed";
inline constexpr const char* kMeanCurveCsvHeader = "strategy,labeled_count,n,mean_accuracy,std_accuracy";
inline constexpr const char* kAucCsvHeader = "strategy,repetitions,mean_auc,std_auc";
inline constexpr const char* kAucPerRepHeader = "strategy,repetition,seed,auc";

// Results in the fixed legend order S1..S6, Random, regardless of run order.
inline std::vector<const RepeatedResult*> in_legend_order(const std::vector<RepeatedResult>& results) {
  std::vector<const RepeatedResult*> out;
  for (Strategy s : kAllStrategies) {
    for (const auto& r : results) {
      if (r.strategy == s) out.push_back(&r);
    }
  }
  return out;
}

inline std::string csv_number(double v) { return std::isnan(v) ? std::string() : format_double(v); }

inline void write_curves_csv(std::ostream& out, const std::vector<RepeatedResult>& results) {
  out << kCurveCsvHeader << "\n";
  for (const auto* r : in_legend_order(results)) {
    for (std::size_t rep = 0; rep < r->curves.size(); ++rep) {
      const auto& curve = r->curves[rep];
      for (const auto& pt : curve.points) {
        out << to_string(r->strategy) << "," << rep << "," << curve.seed << "," << pt.labeled_count << ","
            << csv_number(pt.accuracy);
        for (double rc : pt.recall) out << "," << csv_number(rc);
        out << "\n";
      }
    }
  }
}

inline void write_mean_curves_csv(std::ostream& out, const std::vector<RepeatedResult>& results) {
  out << kMeanCurveCsvHeader << "\n";
  for (const auto* r : in_legend_order(results)) {
    for (const auto& mp : r->mean_curve) {
      out << to_string(r->strategy) << "," << mp.labeled_count << "," << mp.n << "," << csv_number(mp.mean) << ","
          << csv_number(mp.stddev) << "\n";
    }
  }
}

inline void write_auc_csv(std::ostream& out, const std::vector<RepeatedResult>& results) {
  out << kAucCsvHeader << "\n";
  for (const auto* r : in_legend_order(results)) {
    out << to_string(r->strategy) << "," << r->curves.size() << "," << csv_number(r->mean_auc) << ","
        << csv_number(r->std_auc) << "\n";
  }
}

inline void write_auc_per_rep_csv(std::ostream& out, const std::vector<RepeatedResult>& results) {
  out << kAucPerRepHeader << "\n";
  for (const auto* r : in_legend_order(results)) {
    for (std::size_t rep = 0; rep < r->aucs.size(); ++rep) {
      out << to_string(r->strategy) << "," << rep << "," << r->curves[rep].seed << "," << csv_number(r->aucs[rep])
          << "\n";
    }
  }
}

namespace detail {

inline const char* series_color(Strategy s) {
  switch (s) {
    case Strategy::s1: return "#1f77b4";
    case Strategy::s2: return "#ff7f0e";
    case Strategy::s3: return "#2ca02c";
    case Strategy::s4: return "#d62728";
    case Strategy::s5: return "#9467bd";
    case Strategy::s6: return "#8c564b";
    case Strategy::random: return "#7f7f7f";
  }
  return "#000000";
}

inline std::string fixed(double v, int digits = 2) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

}  // namespace detail

// Left panel: mean learning curves. Right panel: mean normalized AUC bars.
inline std::string render_report_html(const std::vector<RepeatedResult>& results) {
  const auto ordered = in_legend_order(results);
  constexpr double W = 520, H = 360, L = 60, R = 20, T = 30, B = 50;
  double max_count = 1.0;
  double min_count = 0.0;
  bool first = true;
  for (const auto* r : ordered) {
    for (const auto& mp : r->mean_curve) {
      const double c = static_cast<double>(mp.labeled_count);
      if (first) {
        min_count = max_count = c;
        first = false;
      }
      min_count = std::min(min_count, c);
      max_count = std::max(max_count, c);
    }
  }
  if (max_count <= min_count) max_count = min_count + 1.0;
  auto sx = [&](double c) { return L + (c - min_count) / (max_count - min_count) * (W - L - R); };
  auto sy = [&](double a) { return H - B - a * (H - T - B); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\">Learning curves</text>\n";
  svg << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double a = i / 5.0;
    svg << "<text x=\"" << L - 6 << "\" y=\"" << detail::fixed(sy(a) + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
        << detail::fixed(a, 1) << "</text>\n";
  }
  svg << "<text x=\"" << L << "\" y=\"" << H - B + 16 << "\" font-size=\"11\">" << min_count << "</text>\n";
  svg << "<text x=\"" << W - R << "\" y=\"" << H - B + 16 << "\" text-anchor=\"end\" font-size=\"11\">" << max_count
      << "</text>\n";
  svg << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">labeled pages</text>\n";
  for (const auto* r : ordered) {
    std::ostringstream pts;
    for (const auto& mp : r->mean_curve) {
      pts << detail::fixed(sx(static_cast<double>(mp.labeled_count))) << "," << detail::fixed(sy(mp.mean)) << " ";
    }
    svg << "<polyline class=\"series\" data-strategy=\"" << to_string(r->strategy) << "\" fill=\"none\" stroke=\""
        << detail::series_color(r->strategy) << "\" stroke-width=\"1.5\" points=\"" << pts.str() << "\"/>\n";
  }
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const double y = T + 14.0 * static_cast<double>(i);
    svg << "<rect class=\"legend\" x=\"" << W - R - 80 << "\" y=\"" << y << "\" width=\"10\" height=\"10\" fill=\""
        << detail::series_color(ordered[i]->strategy) << "\"/><text x=\"" << W - R - 65 << "\" y=\"" << y + 9
        << "\" font-size=\"11\">" << to_string(ordered[i]->strategy) << "</text>\n";
  }
  svg << "</svg>\n";

  std::ostringstream bars;
  const double bw = ordered.empty() ? 0.0 : (W - L - R) / static_cast<double>(ordered.size());
  bars << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  bars << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\">Normalized AUC</text>\n";
  bars << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
       << "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const auto* r = ordered[i];
    const double x = L + bw * static_cast<double>(i) + bw * 0.15;
    const double top = sy(std::clamp(r->mean_auc, 0.0, 1.0));
    bars << "<rect x=\"" << detail::fixed(x) << "\" y=\"" << detail::fixed(top) << "\" width=\"" << detail::fixed(bw * 0.7)
         << "\" height=\"" << detail::fixed(H - B - top) << "\" fill=\"" << detail::series_color(r->strategy)
         << "\"/>\n";
    bars << "<text x=\"" << detail::fixed(x + bw * 0.35) << "\" y=\"" << H - B + 16
         << "\" text-anchor=\"middle\" font-size=\"11\">" << to_string(r->strategy) << "</text>\n";
    bars << "<text x=\"" << detail::fixed(x + bw * 0.35) << "\" y=\"" << detail::fixed(top - 4)
         << "\" text-anchor=\"middle\" font-size=\"10\">" << detail::fixed(r->mean_auc, 3) << "</text>\n";
  }
  bars << "</svg>\n";

  std::ostringstream html;
  html << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>fontid report</title></head>\n<body>\n"
       << svg.str() << bars.str() << "</body></html>\n";
  return html.str();
}

struct ReportFiles {
  std::filesystem::path curves;
  std::filesystem::path mean_curves;
  std::filesystem::path auc_summary;
  std::filesystem::path auc_per_rep;
  std::filesystem::path html;
};

inline ReportFiles emit_report(const std::vector<RepeatedResult>& results, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::io, "cannot create report directory " + out_dir.string() + ": " + ec.message());
  ReportFiles files{out_dir / "learning_curves.csv", out_dir / "mean_curves.csv", out_dir / "auc_summary.csv",
                    out_dir / "auc_per_repetition.csv", out_dir / "report.html"};
  auto write = [](const std::filesystem::path& p, auto&& body) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + p.string());
    body(out);
    if (!out) throw Error(Errc::io, "write failed: " + p.string());
  };
  write(files.curves, [&](std::ostream& o) { write_curves_csv(o, results); });
  write(files.mean_curves, [&](std::ostream& o) { write_mean_curves_csv(o, results); });
  write(files.auc_summary, [&](std::ostream& o) { write_auc_csv(o, results); });
  write(files.auc_per_rep, [&](std::ostream& o) { write_auc_per_rep_csv(o, results); });
  write(files.html, [&](std::ostream& o) { o << render_report_html(results); });
  return files;
}

// Rebuilds results from a learning_curves.csv so `report` can re-render.
inline std::vector<RepeatedResult> read_curves_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line) || line != kCurveCsvHeader) {
    throw Error(Errc::parse, source + ": expected header '" + std::string(kCurveCsvHeader) + "'");
  }
  std::vector<std::pair<Strategy, std::vector<LearningCurve>>> grouped;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto f = split_csv_line(line);
    if (f.size() != 8) throw Error(Errc::parse, where + ": expected 8 columns");
    const Strategy s = parse_strategy(f[0]);
    const auto rep = static_cast<std::size_t>(parse_double_field(f[1], where));
    auto it = std::find_if(grouped.begin(), grouped.end(), [&](const auto& g) { return g.first == s; });
    if (it == grouped.end()) {
      grouped.push_back({s, {}});
      it = std::prev(grouped.end());
    }
    if (it->second.size() <= rep) it->second.resize(rep + 1);
    auto& curve = it->second[rep];
    curve.strategy = s;
    curve.seed = std::stoull(f[2]);
    CurvePoint pt;
    pt.labeled_count = static_cast<std::size_t>(parse_double_field(f[3], where));
    pt.accuracy = parse_double_field(f[4], where);
    for (std::size_t c = 0; c < pt.recall.size(); ++c) {
      pt.recall[c] = f[5 + c].empty() ? std::nan("") : parse_double_field(f[5 + c], where);
    }
    curve.points.push_back(pt);
  }
  std::vector<RepeatedResult> results;
  for (auto& [s, curves] : grouped) results.push_back(summarize_curves(s, std::move(curves)));
  return results;
}

}  // namespace fontid
