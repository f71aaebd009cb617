// Copyright 2026 The dmrseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include "common.hpp"
#include "dmrseg/checkpoint.hpp"
#include "dmrseg/error.hpp"
#include "dmrseg/kv.hpp"

namespace dmrseg::tools {
namespace {

inline constexpr int kHistBins = 101;

struct DiagArgs {
  std::string model;
  std::string hist;
  bool kernels_only = false;
  std::string curves;
  std::string out;
};

// --- weight histogram ------------------------------------------------------

std::string weights_histogram(const std::string& model_path, bool kernels_only) {
  const auto ck = ckpt::load<float>(model_path);
  std::vector<double> values;
  for (const auto* g : ck.params.groups()) {
    for (const auto& p : g->params()) {
      if (kernels_only && !p.name.ends_with(".weight")) continue;
      for (float v : p.tensor.data()) values.push_back(v);
    }
  }
  if (values.empty()) throw UsageError("checkpoint '" + model_path + "' has no matching parameters");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  const double width = (hi - lo) / kHistBins;
  std::vector<std::size_t> counts(kHistBins, 0);
  for (double v : values) {
    int b = width > 0 ? static_cast<int>(std::floor((v - lo) / width)) : kHistBins / 2;
    counts[std::clamp(b, 0, kHistBins - 1)]++;
  }
  std::string out = "bin,lo,hi,count\n";
  for (int b = 0; b < kHistBins; ++b) {
    const double a = lo + width * b;
    const double z = b == kHistBins - 1 ? hi : lo + width * (b + 1);
    out += std::to_string(b) + "," + kv::format_double(a) + "," + kv::format_double(z) + "," +
           std::to_string(counts[b]) + "\n";
  }
  return out;
}

// --- training curves -------------------------------------------------------

struct Log {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column(const std::string& c) const {
    const auto it = std::find(columns.begin(), columns.end(), c);
    return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  return out;
}

std::optional<Log> read_log(const std::filesystem::path& path, const std::string& name) {
  std::stringstream ss(kv::read_file(path.string()));
  std::string line;
  if (!std::getline(ss, line) || !line.starts_with("epoch,")) return std::nullopt;
  Log log{name, split(line), {}};
  int lineno = 1;
  while (std::getline(ss, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != log.columns.size()) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(log.columns.size()) + " fields");
    }
    std::vector<double> row;
    for (const auto& f : fields) {
      try {
        row.push_back(std::stod(f));
      } catch (const std::exception&) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) + ": not a number: '" + f + "'");
      }
    }
    log.rows.push_back(std::move(row));
  }
  return log;
}

std::vector<Log> collect_logs(const std::string& where) {
  namespace fs = std::filesystem;
  if (!fs::exists(where)) throw IoError("no training log at '" + where + "'");
  std::vector<Log> logs;
  if (fs::is_regular_file(where)) {
    auto log = read_log(where, fs::path(where).stem().string());
    if (!log) throw ParseError("'" + where + "' is not a training log (header must start with epoch)");
    logs.push_back(std::move(*log));
    return logs;
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(where)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto rel = fs::relative(f, where);
    rel.replace_extension("");
    if (auto log = read_log(f, rel.generic_string())) logs.push_back(std::move(*log));
  }
  if (logs.empty()) throw IoError("no training logs under '" + where + "'");
  return logs;
}

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (epoch, value)
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// One panel: axes, min / max ticks, a polyline per series and one marker per
// epoch so every log row is traceable in the file.
std::string panel(const std::string& title, const std::vector<Series>& series, double x0, double y0,
                  double w, double h) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x), xmax = std::max(xmax, x);
      if (std::isfinite(y)) ymin = std::min(ymin, y), ymax = std::max(ymax, y);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1;
  if (!std::isfinite(ymin)) ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double pl = 50, pr = 10, pt = 24, pb = 30;
  auto px = [&](double x) { return x0 + pl + (x - xmin) / (xmax - xmin) * (w - pl - pr); };
  auto py = [&](double y) { return y0 + h - pb - (y - ymin) / (ymax - ymin) * (h - pt - pb); };

  std::ostringstream o;
  o << "<g class=\"panel\">\n";
  o << "<text x=\"" << x0 + w / 2 << "\" y=\"" << y0 + 16 << "\" text-anchor=\"middle\">" << title
    << "</text>\n";
  o << "<rect x=\"" << x0 + pl << "\" y=\"" << y0 + pt << "\" width=\"" << w - pl - pr << "\" height=\""
    << h - pt - pb << "\" fill=\"none\" stroke=\"#888\"/>\n";
  o << "<text x=\"" << x0 + pl - 4 << "\" y=\"" << py(ymax) + 4 << "\" text-anchor=\"end\">" << fmt(ymax)
    << "</text>\n";
  o << "<text x=\"" << x0 + pl - 4 << "\" y=\"" << py(ymin) + 4 << "\" text-anchor=\"end\">" << fmt(ymin)
    << "</text>\n";
  o << "<text x=\"" << px(xmin) << "\" y=\"" << y0 + h - 12 << "\" text-anchor=\"middle\">" << fmt(xmin)
    << "</text>\n";
  o << "<text x=\"" << px(xmax) << "\" y=\"" << y0 + h - 12 << "\" text-anchor=\"middle\">" << fmt(xmax)
    << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* colour = kPalette[i % std::size(kPalette)];
    const bool dashed = s.label.ends_with("val");
    o << "<polyline fill=\"none\" stroke=\"" << colour << "\"" << (dashed ? " stroke-dasharray=\"4 3\"" : "")
      << " points=\"";
    for (const auto& [x, y] : s.points) {
      if (std::isfinite(y)) o << px(x) << "," << py(y) << " ";
    }
    o << "\"><title>" << s.label << "</title></polyline>\n";
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(y)) continue;
      o << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"2\" fill=\"" << colour
        << "\" data-series=\"" << s.label << "\" data-epoch=\"" << static_cast<long>(x) << "\"><title>"
        << s.label << " epoch " << static_cast<long>(x) << ": " << fmt(y) << "</title></circle>\n";
    }
    o << "<text x=\"" << x0 + pl + 6 << "\" y=\"" << y0 + pt + 14 * (i + 1) << "\" fill=\"" << colour
      << "\" font-size=\"10\">" << s.label << "</text>\n";
  }
  o << "</g>\n";
  return o.str();
}

std::string render_curves(const std::vector<Log>& logs) {
  struct Spec {
    std::string title;
    std::vector<std::pair<std::string, std::string>> columns;  // (column, suffix)
  };
  const std::vector<Spec> panels{
      {"cross-entropy", {{"train_ce", "train"}, {"val_ce", "val"}}},
      {"distance-map MAD (px)", {{"train_mad", "train"}, {"val_mad", "val"}}},
      {"validation Dice", {{"val_dice_mean", "val"}}},
  };
  const double w = 360, h = 300;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w * panels.size() << "\" height=\"" << h
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    std::vector<Series> series;
    for (const auto& log : logs) {
      const int ce = log.column("epoch");
      for (const auto& [col, suffix] : panels[p].columns) {
        const int c = log.column(col);
        if (c < 0) continue;
        Series s{log.name + " " + suffix, {}};
        for (const auto& row : log.rows) s.points.emplace_back(row[ce], row[c]);
        series.push_back(std::move(s));
      }
    }
    o << panel(panels[p].title, series, w * p, 0, w, h);
  }
  o << "</svg>\n";
  return o.str();
}

void run_diag(const DiagArgs& a) {
  if (a.hist.empty() && a.curves.empty()) {
    throw UsageError("diag needs --weights-hist (with --model) or --curves (with --out)");
  }
  std::vector<std::pair<std::string, std::string>> resolved;
  if (!a.hist.empty()) {
    if (a.model.empty()) throw UsageError("--weights-hist needs --model");
    make_parent(a.hist);
    write_text(a.hist, weights_histogram(a.model, a.kernels_only));
    resolved = {{"model", absolute(a.model)},
                {"weights_hist", absolute(a.hist)},
                {"kernels_only", a.kernels_only ? "true" : "false"}};
    write_text(a.hist + ".resolved", kv_text(resolved));
  }
  if (!a.curves.empty()) {
    if (a.out.empty()) throw UsageError("--curves needs --out");
    const auto logs = collect_logs(a.curves);
    make_parent(a.out);
    write_text(a.out, render_curves(logs));
    write_text(a.out + ".resolved", kv_text({{"curves", absolute(a.curves)}, {"out", absolute(a.out)}}));
  }
}

}  // namespace

void add_diag(CLI::App& app) {
  auto args = std::make_shared<DiagArgs>();
  auto* sub = app.add_subcommand("diag", "Weight histograms and training-curve plots");
  sub->add_option("--model", args->model, "Checkpoint for --weights-hist");
  sub->add_option("--weights-hist", args->hist, "Histogram CSV, 101 bins over the observed range");
  sub->add_flag("--kernels-only", args->kernels_only, "Histogram convolution kernels only");
  sub->add_option("--curves", args->curves, "Training log CSV, or a directory searched for them");
  sub->add_option("--out", args->out, "SVG file for --curves");
  sub->callback([args] { run_diag(*args); });
}

}  // namespace dmrseg::tools
