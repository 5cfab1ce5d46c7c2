#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace maglab {

// Version of the run-directory contract (manifest fields, CSV headers, JSON layouts).
constexpr const char* kSchemaVersion = "1.0";
constexpr const char* kToolVersion = "0.9.0";

// Doubles are written with 17 significant digits so a CSV round-trips exactly.
std::string format_double(double v);

using CsvCell = std::variant<double, long long, int, std::string>;

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  const std::vector<std::string>& header() const { return header_; }
  size_t rows() const { return rows_.size(); }
  void add(std::vector<CsvCell> row);
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// Parsed CSV, all cells as text.
struct CsvData {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int column(const std::string& name) const;  // -1 when absent
};
CsvData read_csv(const std::filesystem::path& p);

// One run directory. Artifacts are recorded as they are written; the manifest goes last.
class RunDirectory {
 public:
  explicit RunDirectory(std::filesystem::path dir);
  const std::filesystem::path& path() const { return dir_; }
  void write_csv(const std::string& name, const CsvTable& t);
  void write_json(const std::string& name, const nlohmann::json& j);
  const std::vector<std::string>& artifacts() const { return artifacts_; }
  // Relative to this run; used by nested runs in check mode.
  void record(const std::string& name) { artifacts_.push_back(name); }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> artifacts_;
};

struct Manifest {
  std::string subcommand;
  unsigned long long seed = 0;
  nlohmann::json config;         // effective configuration, every option with its value
  std::string config_text;       // same, as INI text
  std::vector<std::string> artifacts;
  std::string status = "ok";     // ok, tolerance_violation, error
  nlohmann::json checks = nlohmann::json::object();  // name -> {value, tol, pass}
  nlohmann::json to_json() const;
};
nlohmann::json library_versions();
void write_manifest(const std::filesystem::path& dir, const Manifest& m);
// error.json: {schema_version, code, message, details}
void write_error(const std::filesystem::path& dir, const std::string& code, const std::string& message,
                 const nlohmann::json& details = nlohmann::json::object());

nlohmann::json read_json(const std::filesystem::path& p);

}  // namespace maglab
