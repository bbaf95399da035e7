#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "cltlab/common.hpp"
#include "cltlab/dist.hpp"
#include "cltlab/edgeworth.hpp"
#include "cltlab/grid.hpp"
#include "cltlab/info.hpp"
#include "cltlab/stein.hpp"

namespace cltlab {

struct SweepRow {
  std::size_t n = 0;
  double d = 0.0;
  double kl_wg = 0.0;
  double kl_gw = 0.0;
  double l1 = 0.0;
  double entropy_w = 0.0;
  double sup_edgeworth_error = 0.0;
  double e_delta_sq = std::numeric_limits<double>::quiet_NaN();
  double runtime_ms = 0.0;
  bool ok = true;
  std::string failure_reason;
};

inline const char* sweep_csv_header() {
  return "n,d,kl_wg,kl_gw,l1,entropy_w,sup_edgeworth_error,e_delta_sq,runtime_ms";
}

inline std::string sweep_csv_row(const SweepRow& r) {
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "%zu,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g", r.n, r.d,
                r.kl_wg, r.kl_gw, r.l1, r.entropy_w, r.sup_edgeworth_error,
                r.e_delta_sq, r.runtime_ms);
  return buf;
}

struct SweepConfig {
  double step = 1.0 / 256.0;
  double delta0 = 1.0;
  int edgeworth_order = 2;
  R2Variant variant = R2Variant::classical_he4;
};

/// One row per n; a row that trips a numerical contract (e.g. a compact
/// support family breaking KL(G || W_n)) is marked failed, not fatal.
inline std::vector<SweepRow> run_sweep(const std::vector<DistributionSpec>& specs,
                                       const std::vector<std::size_t>& ns,
                                       const SweepConfig& cfg = SweepConfig{}) {
  if (specs.empty()) throw invalid_parameter("run_sweep: no summand families");
  for (std::size_t i = 1; i < ns.size(); ++i)
    if (ns[i] <= ns[i - 1])
      throw invalid_parameter("run_sweep: ns must be strictly ascending");
  std::vector<SweepRow> rows;
  rows.reserve(ns.size());
  for (std::size_t n : ns) {
    SweepRow row;
    row.n = n;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const GridSpec grid = GridSpec::for_n(n, cfg.step);
      const GridDensity pn = normalized_sum_density(specs, n, grid);
      const GridDensity phi = standard_normal_grid(pn);
      const DivergenceReport div = symmetric_kl(pn, phi);
      row.d = div.d;
      row.kl_wg = div.kl_pq;
      row.kl_gw = div.kl_qp;
      row.l1 = div.l1;
      row.entropy_w = div.h_p;
      row.sup_edgeworth_error =
          expansion_error(specs, n, cfg.edgeworth_order, grid, cfg.variant,
                          cfg.delta0)
              .sup_error;
      try {
        row.e_delta_sq = coupling_delta_second_moment(specs, n, cfg.delta0).e_delta_sq;
      } catch (const std::exception& e) {
        // infinite-J families are excluded from the coupling metric by policy
        row.e_delta_sq = std::numeric_limits<double>::quiet_NaN();
        row.failure_reason = std::string("e_delta_sq skipped: ") + e.what();
      }
    } catch (const std::exception& e) {
      row.ok = false;
      row.failure_reason = e.what();
    }
    row.runtime_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    rows.push_back(std::move(row));
  }
  return rows;
}

enum class FitModel { log_over_sqrt, inv_sqrt, inv, power };

inline const char* fit_model_name(FitModel m) {
  switch (m) {
    case FitModel::log_over_sqrt: return "log_over_sqrt";
    case FitModel::inv_sqrt: return "inv_sqrt";
    case FitModel::inv: return "inv";
    case FitModel::power: return "power";
  }
  return "?";
}

struct RateFit {
  FitModel model = FitModel::power;
  double constant = 0.0;  // multiplier K of the shape
  double alpha = 0.0;     // exponent, power model only
  double rss = 0.0;       // residual sum of squares in log domain
  bool chosen = false;

  double predict(double n) const {
    switch (model) {
      case FitModel::log_over_sqrt: return constant * std::log(n) / std::sqrt(n);
      case FitModel::inv_sqrt: return constant / std::sqrt(n);
      case FitModel::inv: return constant / n;
      case FitModel::power: return constant * std::pow(n, -alpha);
    }
    return 0.0;
  }
};

inline double sweep_metric(const SweepRow& r, const std::string& metric) {
  if (metric == "d") return r.d;
  if (metric == "kl_wg") return r.kl_wg;
  if (metric == "kl_gw") return r.kl_gw;
  if (metric == "l1") return r.l1;
  if (metric == "sup_edgeworth_error") return r.sup_edgeworth_error;
  if (metric == "e_delta_sq") return r.e_delta_sq;
  throw invalid_parameter("unknown sweep metric: " + metric);
}

/// Least squares in log domain for each model; selection takes the lowest
/// rss with a 2% tolerance preferring the fixed-shape models.
inline std::vector<RateFit> fit_rate(const std::vector<SweepRow>& rows,
                                     const std::string& metric = "d") {
  std::vector<double> lnn, lny;
  for (const auto& r : rows) {
    if (!r.ok) continue;
    const double y = sweep_metric(r, metric);
    if (std::isfinite(y) && y > 0.0) {
      lnn.push_back(std::log(static_cast<double>(r.n)));
      lny.push_back(std::log(y));
    }
  }
  if (lnn.size() < 4)
    throw numeric_error("fit_rate: need at least 4 positive rows for metric " +
                        metric);
  const std::size_t m = lnn.size();

  std::vector<RateFit> fits;
  const auto fixed_fit = [&](FitModel model,
                             const std::function<double(double)>& lnshape) {
    double c = 0.0;
    for (std::size_t i = 0; i < m; ++i) c += lny[i] - lnshape(lnn[i]);
    c /= static_cast<double>(m);
    double rss = 0.0;
    for (std::size_t i = 0; i < m; ++i) rss += sqr(lny[i] - c - lnshape(lnn[i]));
    RateFit f;
    f.model = model;
    f.constant = std::exp(c);
    f.rss = rss;
    return f;
  };
  fits.push_back(fixed_fit(FitModel::log_over_sqrt, [](double ln_n) {
    return std::log(ln_n) - 0.5 * ln_n;
  }));
  fits.push_back(
      fixed_fit(FitModel::inv_sqrt, [](double ln_n) { return -0.5 * ln_n; }));
  fits.push_back(fixed_fit(FitModel::inv, [](double ln_n) { return -ln_n; }));

  {  // power model: lny = c - alpha ln n
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      sx += lnn[i];
      sy += lny[i];
      sxx += lnn[i] * lnn[i];
      sxy += lnn[i] * lny[i];
    }
    const double denom = static_cast<double>(m) * sxx - sx * sx;
    const double slope = (static_cast<double>(m) * sxy - sx * sy) / denom;
    const double c = (sy - slope * sx) / static_cast<double>(m);
    RateFit f;
    f.model = FitModel::power;
    f.alpha = -slope;
    f.constant = std::exp(c);
    for (std::size_t i = 0; i < m; ++i) f.rss += sqr(lny[i] - c - slope * lnn[i]);
    fits.push_back(f);
  }

  double best = fits[0].rss;
  for (const auto& f : fits) best = std::min(best, f.rss);
  const double tol = best * 1.02 + 1e-18;
  int chosen = -1;
  for (int i = 0; i < 3; ++i)
    if (fits[i].rss <= tol && (chosen < 0 || fits[i].rss < fits[chosen].rss))
      chosen = i;
  if (chosen < 0) chosen = 3;
  fits[chosen].chosen = true;
  return fits;
}

// --- report emission ---------------------------------------------------

inline nlohmann::json sweep_row_json(const SweepRow& r) {
  nlohmann::json j{{"n", r.n},
                   {"d", r.d},
                   {"kl_wg", r.kl_wg},
                   {"kl_gw", r.kl_gw},
                   {"l1", r.l1},
                   {"entropy_w", r.entropy_w},
                   {"sup_edgeworth_error", r.sup_edgeworth_error},
                   {"runtime_ms", r.runtime_ms},
                   {"ok", r.ok},
                   {"failure_reason", r.failure_reason}};
  if (std::isfinite(r.e_delta_sq))
    j["e_delta_sq"] = r.e_delta_sq;
  else
    j["e_delta_sq"] = nullptr;
  return j;
}

inline SweepRow sweep_row_from_json(const nlohmann::json& j) {
  SweepRow r;
  r.n = j.at("n").get<std::size_t>();
  r.d = j.at("d").get<double>();
  r.kl_wg = j.at("kl_wg").get<double>();
  r.kl_gw = j.at("kl_gw").get<double>();
  r.l1 = j.at("l1").get<double>();
  r.entropy_w = j.at("entropy_w").get<double>();
  r.sup_edgeworth_error = j.at("sup_edgeworth_error").get<double>();
  r.e_delta_sq = j.at("e_delta_sq").is_null()
                     ? std::numeric_limits<double>::quiet_NaN()
                     : j.at("e_delta_sq").get<double>();
  r.runtime_ms = j.at("runtime_ms").get<double>();
  r.ok = j.at("ok").get<bool>();
  r.failure_reason = j.at("failure_reason").get<std::string>();
  return r;
}

inline nlohmann::json rate_fit_json(const RateFit& f) {
  return nlohmann::json{{"model", fit_model_name(f.model)},
                        {"constant", f.constant},
                        {"alpha", f.alpha},
                        {"rss", f.rss},
                        {"chosen", f.chosen}};
}

inline RateFit rate_fit_from_json(const nlohmann::json& j) {
  RateFit f;
  const std::string m = j.at("model").get<std::string>();
  if (m == "log_over_sqrt") f.model = FitModel::log_over_sqrt;
  else if (m == "inv_sqrt") f.model = FitModel::inv_sqrt;
  else if (m == "inv") f.model = FitModel::inv;
  else if (m == "power") f.model = FitModel::power;
  else throw invalid_parameter("unknown fit model in json: " + m);
  f.constant = j.at("constant").get<double>();
  f.alpha = j.at("alpha").get<double>();
  f.rss = j.at("rss").get<double>();
  f.chosen = j.at("chosen").get<bool>();
  return f;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw numeric_error("cannot open " + path + " for writing");
  out << sweep_csv_header() << "\n";
  for (const auto& r : rows) out << sweep_csv_row(r) << "\n";
}

inline void write_sweep_json(const std::vector<SweepRow>& rows,
                             const std::vector<RateFit>& fits,
                             const std::string& path,
                             const std::string& metric = "d") {
  nlohmann::json j;
  j["metric"] = metric;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) j["rows"].push_back(sweep_row_json(r));
  j["fits"] = nlohmann::json::array();
  for (const auto& f : fits) j["fits"].push_back(rate_fit_json(f));
  std::ofstream out(path);
  if (!out) throw numeric_error("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

/// Self-contained log-log SVG: one circle per row, one path per fitted model.
inline void write_sweep_svg(const std::vector<SweepRow>& rows,
                            const std::vector<RateFit>& fits,
                            const std::string& path,
                            const std::string& metric = "d") {
  std::vector<std::pair<double, double>> pts;  // (ln n, ln y)
  for (const auto& r : rows) {
    if (!r.ok) continue;
    const double y = sweep_metric(r, metric);
    if (std::isfinite(y) && y > 0.0)
      pts.emplace_back(std::log(static_cast<double>(r.n)), std::log(y));
  }
  if (pts.empty()) throw numeric_error("write_sweep_svg: no positive data");
  double xmin = pts[0].first, xmax = pts[0].first;
  double ymin = pts[0].second, ymax = pts[0].second;
  for (const auto& p : pts) {
    xmin = std::min(xmin, p.first);
    xmax = std::max(xmax, p.first);
    ymin = std::min(ymin, p.second);
    ymax = std::max(ymax, p.second);
  }
  for (const auto& f : fits) {
    for (const auto& p : pts) {
      const double v = std::log(f.predict(std::exp(p.first)));
      if (std::isfinite(v)) {
        ymin = std::min(ymin, v);
        ymax = std::max(ymax, v);
      }
    }
  }
  if (xmax - xmin < 1e-9) xmax = xmin + 1.0;
  if (ymax - ymin < 1e-9) ymax = ymin + 1.0;
  const double w = 720.0, h = 480.0, ml = 70.0, mr = 20.0, mt = 20.0, mb = 50.0;
  const auto sx = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr);
  };
  const auto sy = [&](double y) {
    return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb);
  };
  static const char* kColors[4] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd"};

  std::ofstream out(path);
  if (!out) throw numeric_error("cannot open " + path + " for writing");
  char buf[256];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"480\" "
         "viewBox=\"0 0 720 480\">\n";
  out << "<rect width=\"720\" height=\"480\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
                "stroke=\"black\"/>\n",
                ml, h - mb, w - mr, h - mb);
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
                "stroke=\"black\"/>\n",
                ml, mt, ml, h - mb);
  out << buf;
  // axis labels: n at each data point, metric on y
  for (const auto& r : rows) {
    if (!r.ok) continue;
    const double x = std::log(static_cast<double>(r.n));
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" "
                  "text-anchor=\"middle\">%zu</text>\n",
                  sx(x), h - mb + 18.0, r.n);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\">ln %s vs ln "
                "n</text>\n",
                ml, mt - 4.0 + 12.0, metric.c_str());
  out << buf;

  int ci = 0;
  for (const auto& f : fits) {
    std::string d_attr;
    const int kSamples = 64;
    for (int i = 0; i <= kSamples; ++i) {
      const double lx = xmin + (xmax - xmin) * i / kSamples;
      const double ly = std::log(f.predict(std::exp(lx)));
      if (!std::isfinite(ly)) continue;
      std::snprintf(buf, sizeof(buf), "%s%.2f %.2f", d_attr.empty() ? "M" : " L",
                    sx(lx), sy(ly));
      d_attr += buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "<path d=\"%s\" fill=\"none\" stroke=\"%s\" "
                  "stroke-width=\"1.5\"%s/>\n",
                  d_attr.c_str(), kColors[ci % 4],
                  f.chosen ? "" : " stroke-dasharray=\"4 3\"");
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" "
                  "fill=\"%s\">%s rss=%.3g%s</text>\n",
                  w - mr - 210.0, mt + 16.0 * (ci + 1), kColors[ci % 4],
                  fit_model_name(f.model), f.rss, f.chosen ? " (chosen)" : "");
    out << buf;
    ++ci;
  }
  for (const auto& p : pts) {
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"black\"/>\n",
                  sx(p.first), sy(p.second));
    out << buf;
  }
  out << "</svg>\n";
}

/// Emit the requested formats into `dir` with basename `sweep`; returns the
/// written paths.
inline std::vector<std::string> emit_report(const std::vector<SweepRow>& rows,
                                            const std::vector<RateFit>& fits,
                                            const std::vector<std::string>& formats,
                                            const std::string& dir,
                                            const std::string& metric = "d") {
  if (rows.empty()) throw invalid_parameter("emit_report: no rows");
  std::vector<std::string> written;
  const std::string base = dir.empty() ? "sweep" : dir + "/sweep";
  for (const auto& f : formats) {
    if (f == "csv") {
      write_sweep_csv(rows, base + ".csv");
      written.push_back(base + ".csv");
    } else if (f == "json") {
      write_sweep_json(rows, fits, base + ".json", metric);
      written.push_back(base + ".json");
    } else if (f == "svg") {
      write_sweep_svg(rows, fits, base + ".svg", metric);
      written.push_back(base + ".svg");
    } else {
      throw invalid_parameter("emit_report: unknown format " + f);
    }
  }
  return written;
}

}  // namespace cltlab
