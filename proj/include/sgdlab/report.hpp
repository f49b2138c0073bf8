#pragma once

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sgdlab/experiments.hpp"
#include "sgdlab/io.hpp"

namespace sgdlab {

// Serialized report: parameters, test results, artifact manifest with content
// hashes. Wall time is printed by the CLI but kept out of the file so reruns
// are bit-identical.
inline nlohmann::ordered_json report_to_json(const ExperimentReport& report,
                                             const std::vector<ManifestEntry>& manifest) {
  nlohmann::ordered_json j;
  j["experiment"] = report.spec.name;
  j["master_seed"] = report.spec.master_seed;
  nlohmann::ordered_json params;
  for (const auto& [k, v] : report.spec.params) params[k] = v;
  j["parameters"] = params;
  nlohmann::ordered_json results = nlohmann::ordered_json::array();
  for (const auto& r : report.results) {
    results.push_back({{"description", r.description},
                       {"statistic", r.statistic},
                       {"threshold", r.threshold},
                       {"passed", r.passed},
                       {"n_samples", r.n_samples}});
  }
  j["results"] = results;
  nlohmann::ordered_json arts = nlohmann::ordered_json::array();
  for (const auto& m : manifest) arts.push_back({{"file", m.file}, {"hash", m.hash}});
  j["artifacts"] = arts;
  j["all_passed"] = report.all_passed();
  return j;
}

struct LoadedReport {
  std::string experiment;
  std::uint64_t master_seed = 0;
  std::map<std::string, double> parameters;
  std::vector<TestResult> results;
  std::vector<ManifestEntry> artifacts;
  bool all_passed = false;
};

inline LoadedReport load_report(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open report: " + file.string());
  nlohmann::json j;
  in >> j;
  LoadedReport r;
  r.experiment = j.at("experiment").get<std::string>();
  r.master_seed = j.at("master_seed").get<std::uint64_t>();
  for (auto it = j.at("parameters").begin(); it != j.at("parameters").end(); ++it)
    r.parameters[it.key()] = it.value().get<double>();
  for (const auto& e : j.at("results")) {
    TestResult t;
    t.description = e.at("description").get<std::string>();
    t.statistic = e.at("statistic").get<double>();
    t.threshold = e.at("threshold").get<double>();
    t.passed = e.at("passed").get<bool>();
    t.n_samples = e.at("n_samples").get<std::int64_t>();
    r.results.push_back(t);
  }
  for (const auto& e : j.at("artifacts"))
    r.artifacts.push_back({e.at("file").get<std::string>(), e.at("hash").get<std::string>()});
  r.all_passed = j.at("all_passed").get<bool>();
  return r;
}

// Writes <out_dir>/<name>/{*.csv, *.gp, report.json}; returns the manifest.
inline std::vector<ManifestEntry> emit_artifacts(const ExperimentReport& report,
                                                 const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  const fs::path dir = out_dir / report.spec.name;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory: " + dir.string());

  std::vector<ManifestEntry> manifest;
  for (const auto& art : report.artifacts) {
    write_file(dir / art.name, art.content);
    manifest.push_back({art.name, hex64(fnv1a64(art.content))});
    if (art.name.size() > 4 && art.name.substr(art.name.size() - 4) == ".csv") {
      const std::string gp_name = art.name.substr(0, art.name.size() - 4) + ".gp";
      const std::string gp = gnuplot_script_for(art.name, csv_column_count(art.content));
      write_file(dir / gp_name, gp);
      manifest.push_back({gp_name, hex64(fnv1a64(gp))});
    }
  }
  const std::string json_text = report_to_json(report, manifest).dump(2) + "\n";
  write_file(dir / "report.json", json_text);
  return manifest;
}

}  // namespace sgdlab
