#pragma once

#include "mspm/pipeline/stages.hpp"

namespace mspm::pipeline {

/// Structural check of a report document; throws DataError on the first problem.
inline void validate_report(const Json& j) {
  auto need = [&](const Json& obj, const char* key, Json::value_t type, const std::string& where) -> const Json& {
    if (!obj.is_object() || !obj.contains(key)) throw DataError("report: missing '" + where + key + "'");
    const auto& v = obj.at(key);
    const bool ok = v.type() == type || (type == Json::value_t::number_float && v.is_number()) ||
                    (type == Json::value_t::number_unsigned && v.is_number_integer() && v.get<long long>() >= 0);
    if (!ok) throw DataError("report: '" + where + key + "' has the wrong type");
    return v;
  };
  using T = Json::value_t;
  if (need(j, "schema_version", T::number_unsigned, "") != kReportSchemaVersion) {
    throw DataError("report: unsupported schema_version");
  }
  need(j, "engine_version", T::string, "");
  need(j, "config_digest", T::string, "");
  need(j, "config", T::object, "");
  const bool complete = need(j, "complete", T::boolean, "");
  const auto& missing = need(j, "missing_stages", T::array, "");
  if (complete != missing.empty()) throw DataError("report: 'complete' disagrees with 'missing_stages'");
  if (!complete && !j.contains("incomplete")) throw DataError("report: incomplete run without 'incomplete' marker");
  need(j, "stages_completed", T::array, "");
  need(j, "eam", T::object, "");
  need(j["eam"], "training_runs", T::array, "eam.");
  const auto& portfolios = need(j, "portfolios", T::object, "");
  for (const auto& [name, p] : portfolios.items()) {
    const std::string where = "portfolios." + name + ".";
    for (const auto& [strategy, m] : need(p, "strategies", T::object, where).items()) {
      for (const char* k : {"DRR_pct", "ARR_pct", "MD_pct", "final_value"}) {
        need(m, k, T::number_float, where + strategy + ".");
      }
      if (!m.contains("SR") || !(m["SR"].is_null() || m["SR"].is_number())) {
        throw DataError("report: bad '" + where + strategy + ".SR'");
      }
    }
    need(p, "best", T::object, where);
  }
  need(j, "stats", T::object, "");
  need(j, "ablation", T::object, "");
}

/// Assembles the report from the stage artifacts. Timings stay in the manifest so the
/// report is a pure function of config and seeds.
inline Json Pipeline::emit_report() {
  if (manifest_.stages.empty()) throw PrerequisiteError("report: no stage has completed");
  Json r;
  r["schema_version"] = kReportSchemaVersion;
  r["engine_version"] = kEngineVersion;
  r["config_digest"] = manifest_.config_digest;
  Json echo = config_json(cfg_);
  echo.erase("output_dir");
  r["config"] = echo;

  std::vector<std::string> done, missing;
  for (const auto& s : planned_stages(cfg_)) (manifest_.stages.contains(s) ? done : missing).push_back(s);
  r["stages_completed"] = done;
  r["missing_stages"] = missing;
  r["complete"] = missing.empty();
  if (!missing.empty()) {
    r["incomplete"] = {{"reason", "pipeline stopped before every planned stage ran"}, {"missing_stages", missing}};
  }

  r["eam"]["training_runs"] = manifest_.eam_training_runs;
  if (manifest_.stages.contains("gen-signals")) r["eam"]["signals"] = read_json(root_ / "signals" / "positions.json");

  r["portfolios"] = Json::object();
  r["stats"] = Json::object();
  r["ablation"] = Json::object();
  std::string summary = "portfolio,strategy,DRR_pct,ARR_pct,MD_pct,SR,final_value\n";
  for (const auto& p : portfolio_names()) {
    r["portfolios"][p]["assets"] = cfg_.portfolios.at(p);
    if (manifest_.stages.contains("compare")) {
      const auto m = read_json(root_ / "compare" / (p + "_metrics.json"));
      r["portfolios"][p]["strategies"] = m["strategies"];
      r["portfolios"][p]["best"] = m["best"];
      for (const auto& s : strategies()) {
        const auto& b = m["strategies"][s];
        summary += p + "," + s + "," + text::format_double(b["DRR_pct"].get<double>()) + "," +
                   text::format_double(b["ARR_pct"].get<double>()) + "," +
                   text::format_double(b["MD_pct"].get<double>()) + "," +
                   (b["SR"].is_null() ? std::string() : text::format_double(b["SR"].get<double>())) + "," +
                   text::format_double(b["final_value"].get<double>()) + "\n";
      }
    } else {
      r["portfolios"][p]["strategies"] = Json::object();
      r["portfolios"][p]["best"] = Json::object();
    }
    if (manifest_.stages.contains("stats")) r["stats"][p] = read_json(root_ / "stats" / (p + ".json"));
  }
  if (manifest_.stages.contains("ablate")) {
    for (const auto& p : cfg_.ablation.portfolios) r["ablation"][p] = read_json(root_ / "ablation" / (p + ".json"));
  }
  validate_report(r);

  const auto doc = canonical(r);
  fs::create_directories(root_ / "report");
  text::write_file((root_ / "report.json").string(), doc);
  text::write_file((root_ / "report" / "summary.csv").string(), summary);
  manifest_.report_digest = digest_hex(doc);
  save_manifest();
  return r;
}

}  // namespace mspm::pipeline
