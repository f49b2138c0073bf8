#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgdlab/solvers.hpp"
#include "sgdlab/stats.hpp"
#include "sgdlab/types.hpp"

namespace sgdlab {

struct IoError : Error {
  using Error::Error;
};

// Shortest round-trip decimal representation.
inline std::string fmt_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

// CSV content builder: header row, '.' decimals, '\n' line endings.
class CsvBuilder {
 public:
  explicit CsvBuilder(const std::vector<std::string>& header) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out_ += ',';
      out_ += header[i];
    }
    out_ += '\n';
  }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_ += ',';
      out_ += fmt_double(values[i]);
    }
    out_ += '\n';
  }

  void raw_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ += ',';
      out_ += cells[i];
    }
    out_ += '\n';
  }

  const std::string& str() const { return out_; }

 private:
  std::string out_;
};

// Debug dump: one record per row.
inline std::string dataset_csv(const Dataset& ds) {
  std::vector<std::string> header;
  for (int i = 0; i < ds.datum_dim(); ++i) header.push_back("u" + std::to_string(i + 1));
  CsvBuilder csv(header);
  std::vector<double> row(ds.datum_dim());
  for (std::int64_t i = 0; i < ds.n(); ++i) {
    for (int j = 0; j < ds.datum_dim(); ++j) row[j] = ds.records(i, j);
    csv.row(row);
  }
  return csv.str();
}

// One replicate outcome vector per row.
inline std::string ensemble_csv(const Ensemble& ens) {
  std::vector<std::string> header = {"replicate", "seed"};
  for (int j = 0; j < ens.width(); ++j) header.push_back("y" + std::to_string(j + 1));
  CsvBuilder csv(header);
  for (std::int64_t r = 0; r < ens.size(); ++r) {
    std::vector<double> row = {static_cast<double>(r),
                               static_cast<double>(ens.per_replicate_seeds[r])};
    for (int j = 0; j < ens.width(); ++j) row.push_back(ens.replicates(r, j));
    csv.row(row);
  }
  return csv.str();
}

inline std::string trajectory_csv(const Trajectory& traj) {
  const int p = static_cast<int>(traj.iterates.cols());
  std::vector<std::string> header = {"k", "t"};
  for (int i = 0; i < p; ++i) header.push_back("x" + std::to_string(i + 1));
  if (traj.has_aux())
    for (int i = 0; i < p; ++i) header.push_back("y" + std::to_string(i + 1));
  CsvBuilder csv(header);
  for (std::int64_t k = 0; k <= traj.steps(); ++k) {
    std::vector<double> row = {static_cast<double>(k), k * traj.step_scale};
    for (int i = 0; i < p; ++i) row.push_back(traj.iterates(k, i));
    if (traj.has_aux())
      for (int i = 0; i < p; ++i) row.push_back(traj.aux(k, i));
    csv.row(row);
  }
  return csv.str();
}

inline std::string path_csv(const Path& path, std::int64_t stride = 1) {
  const int p = path.dim();
  std::vector<std::string> header = {"t"};
  for (int i = 0; i < p; ++i) header.push_back("x" + std::to_string(i + 1));
  if (path.has_velocity())
    for (int i = 0; i < p; ++i) header.push_back("v" + std::to_string(i + 1));
  CsvBuilder csv(header);
  for (std::int64_t j = 0; j <= path.steps(); j += stride) {
    std::vector<double> row = {path.times[j]};
    for (int i = 0; i < p; ++i) row.push_back(path.states(j, i));
    if (path.has_velocity())
      for (int i = 0; i < p; ++i) row.push_back(path.velocities(j, i));
    csv.row(row);
  }
  return csv.str();
}

inline std::string matrix_path_csv(const MatrixPath& mp, std::int64_t stride = 1) {
  const auto p = mp.matrices.empty() ? 0 : mp.matrices.front().rows();
  std::vector<std::string> header = {"t"};
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j)
      header.push_back("m" + std::to_string(i + 1) + std::to_string(j + 1));
  CsvBuilder csv(header);
  for (std::size_t k = 0; k < mp.matrices.size(); k += stride) {
    std::vector<double> row = {mp.times[static_cast<Eigen::Index>(k)]};
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = 0; j < p; ++j) row.push_back(mp.matrices[k](i, j));
    csv.row(row);
  }
  return csv.str();
}

// --------------------------------------------------------------------------
// Run configuration: experiment name, parameter overrides, seed, output dir.

struct RunConfig {
  std::string experiment;
  std::map<std::string, double> overrides;
  std::uint64_t master_seed = 42;
  std::string out_dir = "out";
  int threads = 0;  // 0 = auto
};

struct UsageError : Error {
  using Error::Error;
};

inline double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw UsageError("malformed value for '" + key + "': " + text);
  }
}

// Flat `key = value` config file with one [section] per experiment; the keys
// seed/threads/out are accepted globally (before any section).
inline void apply_config_file(const std::string& file, RunConfig& cfg) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open config file: " + file);
  std::string line, section;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line is not key = value: " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (section.empty()) {
      if (key == "seed")
        cfg.master_seed = static_cast<std::uint64_t>(parse_double(key, val));
      else if (key == "threads")
        cfg.threads = static_cast<int>(parse_double(key, val));
      else if (key == "out")
        cfg.out_dir = val;
      else
        throw UsageError("unknown global config key: " + key);
    } else if (section == cfg.experiment) {
      cfg.overrides.emplace(key, parse_double(key, val));
    }
  }
}

// --------------------------------------------------------------------------
// Report emission.

struct ArtifactFile {
  std::string name;     // relative to the experiment directory
  std::string content;  // full file body
};

struct ManifestEntry {
  std::string file;
  std::string hash;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path.string());
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::string gnuplot_script_for(const std::string& csv_name, int n_columns) {
  std::ostringstream os;
  const std::string base = csv_name.substr(0, csv_name.rfind('.'));
  const bool scatter = csv_name.find("scatter") != std::string::npos ||
                       csv_name.find("samples") != std::string::npos;
  os << "set datafile separator ','\n";
  os << "set key autotitle columnhead\n";
  os << "set terminal pngcairo size 900,600\n";
  os << "set output '" << base << ".png'\n";
  os << "plot ";
  for (int c = 2; c <= n_columns; ++c) {
    if (c > 2) os << ", ";
    os << "'" << csv_name << "' using 1:" << c
       << (scatter ? " with points pt 7 ps 0.3" : " with lines");
  }
  os << "\n";
  return os.str();
}

inline int csv_column_count(const std::string& content) {
  const auto eol = content.find('\n');
  const std::string header = content.substr(0, eol);
  return static_cast<int>(std::count(header.begin(), header.end(), ',')) + 1;
}

}  // namespace sgdlab
