#include "semleak/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "semleak/errors.hpp"
#include "semleak/text.hpp"

namespace semleak {

namespace {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string opt_number(const std::optional<double>& v) {
  return v ? text::format_number(*v) : std::string();
}

}  // namespace

Histogram emit_diff_distribution(std::span<const double> diffs, int bins) {
  if (diffs.empty()) throw Error("diff distribution of an empty list");
  if (bins < 1) throw Error("histogram needs at least one bin");
  auto [min_it, max_it] = std::minmax_element(diffs.begin(), diffs.end());
  double lo = *min_it;
  double hi = *max_it;
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / bins;
  Histogram h;
  h.edges.resize(bins + 1);
  for (int k = 0; k < bins; ++k) h.edges[k] = lo + k * width;
  h.edges[bins] = hi;
  h.counts.assign(bins, 0);
  std::size_t positive = 0, negative = 0, zero = 0;
  for (double d : diffs) {
    auto k = static_cast<long>(std::floor((d - lo) / width));
    k = std::clamp<long>(k, 0, bins - 1);
    ++h.counts[k];
    if (d > 0) {
      ++positive;
    } else if (d < 0) {
      ++negative;
    } else {
      ++zero;
    }
  }
  const double n = static_cast<double>(diffs.size());
  h.positive_share = positive / n;
  h.negative_share = negative / n;
  h.zero_share = zero / n;
  return h;
}

nlohmann::json histogram_to_json(const Histogram& h) {
  return {{"edges", h.edges},
          {"counts", h.counts},
          {"positive_share", h.positive_share},
          {"negative_share", h.negative_share},
          {"zero_share", h.zero_share}};
}

Histogram histogram_from_json(const nlohmann::json& j) {
  Histogram h;
  h.edges = j.at("edges").get<std::vector<double>>();
  h.counts = j.at("counts").get<std::vector<std::size_t>>();
  h.positive_share = j.at("positive_share").get<double>();
  h.negative_share = j.at("negative_share").get<double>();
  h.zero_share = j.at("zero_share").get<double>();
  return h;
}

std::string histogram_csv(const Histogram& h) {
  std::ostringstream out;
  out << "lower,upper,count\n";
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    out << text::format_number(h.edges[k]) << ',' << text::format_number(h.edges[k + 1]) << ','
        << h.counts[k] << '\n';
  }
  return out.str();
}

nlohmann::json ReportBundle::to_json() const {
  nlohmann::json j;
  j["metadata"] = metadata;
  j["model_families"] = model_families;
  j["reports"] = nlohmann::json::array();
  for (const auto& r : reports) j["reports"].push_back(report_to_json(r));
  j["pairs"] = nlohmann::json::array();
  for (const auto& p : pairs) j["pairs"].push_back(pair_to_json(p));
  j["histograms"] = nlohmann::json::array();
  for (const auto& h : histograms) {
    j["histograms"].push_back({{"backend_id", h.backend_id},
                               {"model_id", h.model_id},
                               {"histogram", histogram_to_json(h.histogram)}});
  }
  j["stats"] = stats;
  return j;
}

ReportBundle ReportBundle::from_json(const nlohmann::json& j) {
  ReportBundle b;
  try {
    b.metadata = j.value("metadata", nlohmann::json::object());
    if (j.contains("model_families")) {
      b.model_families = j.at("model_families").get<std::map<std::string, std::string>>();
    }
    for (const auto& r : j.at("reports")) b.reports.push_back(report_from_json(r));
    if (j.contains("pairs")) {
      for (const auto& p : j.at("pairs")) b.pairs.push_back(pair_from_json(p));
    }
    if (j.contains("histograms")) {
      for (const auto& h : j.at("histograms")) {
        b.histograms.push_back({h.at("backend_id").get<std::string>(),
                                h.at("model_id").get<std::string>(),
                                histogram_from_json(h.at("histogram"))});
      }
    }
    b.stats = j.value("stats", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed bundle: ") + e.what());
  }
  return b;
}

void write_bundle(const ReportBundle& bundle, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write bundle " + path.string());
  out << bundle.to_json().dump(2) << '\n';
}

ReportBundle read_bundle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open bundle " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return ReportBundle::from_json(j);
}

std::string format_rate(double rate) {
  const double scaled = rate * 10.0;
  const double floor_value = std::floor(scaled);
  const double frac = scaled - floor_value;
  double rounded;
  if (std::abs(frac - 0.5) < 1e-9) {
    rounded = std::fmod(floor_value, 2.0) == 0.0 ? floor_value : floor_value + 1.0;
  } else {
    rounded = std::round(scaled);
  }
  if (rounded == 0.0) rounded = 0.0;  // no "-0.0"
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f", rounded / 10.0);
  return buf;
}

RenderedTable render_leak_table(const ReportBundle& bundle) {
  std::vector<const LeakRateReport*> overall;
  for (const auto& r : bundle.reports) {
    if (r.axis == BreakdownAxis::kOverall) overall.push_back(&r);
  }
  if (overall.empty()) throw Error("bundle has no overall reports to render");

  std::vector<std::string> models;
  std::vector<std::string> backends;
  if (bundle.metadata.contains("backend_ids") && bundle.metadata["backend_ids"].is_array()) {
    for (const auto& b : bundle.metadata["backend_ids"]) backends.push_back(b.get<std::string>());
  }
  for (const auto* r : overall) {
    if (std::find(models.begin(), models.end(), r->model_id) == models.end()) {
      models.push_back(r->model_id);
    }
    if (std::find(backends.begin(), backends.end(), r->backend_id) == backends.end()) {
      backends.push_back(r->backend_id);
    }
  }

  auto lookup = [&](const std::string& model, const std::string& backend) -> const LeakRateReport* {
    for (const auto* r : overall) {
      if (r->model_id == model && r->backend_id == backend) return r;
    }
    return nullptr;
  };
  auto family_of = [&](const std::string& model) {
    auto it = bundle.model_families.find(model);
    return it == bundle.model_families.end() ? model : it->second;
  };

  std::map<std::string, std::size_t> family_sizes;
  for (const auto& m : models) ++family_sizes[family_of(m)];
  // (family, backend) -> max rate
  std::map<std::pair<std::string, std::string>, double> family_max;
  for (const auto& m : models) {
    for (const auto& b : backends) {
      const auto* r = lookup(m, b);
      if (r == nullptr || !r->leak_rate) continue;
      auto key = std::make_pair(family_of(m), b);
      auto it = family_max.find(key);
      if (it == family_max.end() || *r->leak_rate > it->second) family_max[key] = *r->leak_rate;
    }
  }

  std::ostringstream txt;
  std::ostringstream csv;
  txt << "Model";
  csv << "model";
  for (const auto& b : backends) {
    txt << " | " << b;
    csv << ',' << csv_field(b);
  }
  txt << '\n';
  csv << '\n';
  for (const auto& m : models) {
    txt << m;
    csv << csv_field(m);
    for (const auto& b : backends) {
      const auto* r = lookup(m, b);
      std::string cell = "-";
      std::string csv_cell;
      if (r != nullptr) {
        cell = r->leak_rate ? format_rate(*r->leak_rate) : "n/a";
        csv_cell = r->leak_rate ? format_rate(*r->leak_rate) : "";
        if (r->leak_rate && family_sizes[family_of(m)] > 1 &&
            *r->leak_rate == family_max[{family_of(m), b}]) {
          cell = "**" + cell + "**";
        }
      }
      txt << " | " << cell;
      csv << ',' << csv_cell;
    }
    txt << '\n';
    csv << '\n';
  }
  return {txt.str(), csv.str()};
}

std::string reports_csv(std::span<const LeakRateReport> reports) {
  std::ostringstream out;
  out << "backend_id,model_id,axis,bucket,n,leak_rate,t_statistic,p_value,flagged_count,mean_diff\n";
  for (const auto& r : reports) {
    out << csv_field(r.backend_id) << ',' << csv_field(r.model_id) << ',' << to_string(r.axis)
        << ',' << csv_field(r.bucket) << ',' << r.n << ',' << opt_number(r.leak_rate) << ','
        << opt_number(r.t_statistic) << ',' << opt_number(r.p_value) << ',' << r.flagged_count
        << ',' << text::format_number(r.mean_diff) << '\n';
  }
  return out.str();
}

}  // namespace semleak
