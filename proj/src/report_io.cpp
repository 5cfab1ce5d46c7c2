#include "maglab/report_io.hpp"

#include <Eigen/Core>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "maglab/errors.hpp"

namespace maglab {

namespace fs = std::filesystem;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string r = "\"";
  for (char c : s) {
    if (c == '"') r += '"';
    r += c;
  }
  return r + "\"";
}

std::string cell_text(const CsvCell& c) {
  if (const double* d = std::get_if<double>(&c)) return format_double(*d);
  if (const long long* l = std::get_if<long long>(&c)) return std::to_string(*l);
  if (const int* i = std::get_if<int>(&c)) return std::to_string(*i);
  return quote(std::get<std::string>(c));
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw InvalidArgument("cannot write " + p.string());
  os << text;
  if (!os) throw InvalidArgument("write failed for " + p.string());
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool q = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (q) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        q = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      q = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void CsvTable::add(std::vector<CsvCell> row) {
  if (row.size() != header_.size()) throw InvalidArgument("csv row width differs from header");
  std::vector<std::string> r;
  for (const auto& c : row) r.push_back(cell_text(c));
  rows_.push_back(std::move(r));
}

std::string CsvTable::str() const {
  std::ostringstream os;
  for (size_t j = 0; j < header_.size(); ++j) os << (j ? "," : "") << quote(header_[j]);
  os << "\n";
  for (const auto& r : rows_) {
    for (size_t j = 0; j < r.size(); ++j) os << (j ? "," : "") << r[j];
    os << "\n";
  }
  return os.str();
}

int CsvData::column(const std::string& name) const {
  for (size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return static_cast<int>(j);
  return -1;
}

CsvData read_csv(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw InvalidArgument("cannot read " + p.string());
  CsvData d;
  std::string line;
  if (std::getline(is, line)) d.header = split_csv_line(line);
  while (std::getline(is, line))
    if (!line.empty()) d.rows.push_back(split_csv_line(line));
  return d;
}

RunDirectory::RunDirectory(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

void RunDirectory::write_csv(const std::string& name, const CsvTable& t) {
  write_file(dir_ / name, t.str());
  artifacts_.push_back(name);
}

void RunDirectory::write_json(const std::string& name, const nlohmann::json& j) {
  write_file(dir_ / name, j.dump(2) + "\n");
  artifacts_.push_back(name);
}

nlohmann::json library_versions() {
  return {{"maglab", kToolVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", CLI11_VERSION},
#if defined(__clang__)
          {"compiler", std::string("clang ") + __clang_version__},
#elif defined(__GNUC__)
          {"compiler", std::string("gcc ") + __VERSION__},
#else
          {"compiler", "unknown"},
#endif
          {"cxx_standard", static_cast<long>(__cplusplus)}};
}

nlohmann::json Manifest::to_json() const {
  return {{"schema_version", kSchemaVersion},
          {"tool", "maglab_cli"},
          {"versions", library_versions()},
          {"subcommand", subcommand},
          {"seed", seed},
          {"config", config},
          {"config_text", config_text},
          {"artifacts", artifacts},
          {"status", status},
          {"checks", checks}};
}

void write_manifest(const fs::path& dir, const Manifest& m) {
  fs::create_directories(dir);
  write_file(dir / "manifest.json", m.to_json().dump(2) + "\n");
}

void write_error(const fs::path& dir, const std::string& code, const std::string& message,
                 const nlohmann::json& details) {
  fs::create_directories(dir);
  const nlohmann::json j{{"schema_version", kSchemaVersion}, {"code", code}, {"message", message}, {"details", details}};
  write_file(dir / "error.json", j.dump(2) + "\n");
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw InvalidArgument("cannot read " + p.string());
  return nlohmann::json::parse(is);
}

}  // namespace maglab
