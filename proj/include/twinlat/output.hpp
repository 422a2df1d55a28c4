#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "twinlat/common.hpp"

namespace twinlat {

using nlohmann::json;

inline void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw io_error("cannot create output directory '" + dir + "': " + ec.message());
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw io_error("error writing '" + path + "'");
}

// csv table with fixed column set; numbers at full double precision
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
    for (std::size_t i = 0; i < columns_.size(); ++i)
      body_ << columns_[i] << (i + 1 < columns_.size() ? "," : "\n");
  }

  void add_row(const std::vector<double>& values) {
    if (values.size() != columns_.size())
      throw io_error("csv row width does not match the header");
    body_ << std::setprecision(15);
    for (std::size_t i = 0; i < values.size(); ++i)
      body_ << values[i] << (i + 1 < values.size() ? "," : "\n");
    ++rows_;
  }

  int rows() const { return rows_; }
  std::string str() const { return body_.str(); }

 private:
  std::vector<std::string> columns_;
  std::ostringstream body_;
  int rows_ = 0;
};

// collects every file a command produced plus run metadata, lands as
// manifest.json next to the outputs
class Manifest {
 public:
  Manifest(std::string directory, std::string command)
      : dir_(std::move(directory)), t0_(std::chrono::steady_clock::now()) {
    doc_["app"] = "twinlat";
    doc_["version"] = version_string;
    doc_["command"] = std::move(command);
    doc_["outputs"] = json::array();
    doc_["complete"] = false;
    // flushed immediately so an interrupted run leaves a manifest that
    // marks its outputs as partial
    write_text_file(dir_ + "/manifest.json", doc_.dump(2) + "\n");
  }

  void set(const std::string& key, json value) { doc_[key] = std::move(value); }

  void write_csv(const std::string& name, const CsvTable& table) {
    write_text_file(dir_ + "/" + name, table.str());
    doc_["outputs"].push_back({{"file", name}, {"kind", "csv"}, {"rows", table.rows()}});
  }

  void write_json(const std::string& name, const json& value) {
    write_text_file(dir_ + "/" + name, value.dump(2) + "\n");
    doc_["outputs"].push_back({{"file", name}, {"kind", "json"}});
  }

  void write_raw(const std::string& name, const std::string& content, const std::string& kind) {
    write_text_file(dir_ + "/" + name, content);
    doc_["outputs"].push_back({{"file", name}, {"kind", kind}});
  }

  void finalize() {
    const auto dt = std::chrono::steady_clock::now() - t0_;
    doc_["wall_seconds"] = std::chrono::duration<double>(dt).count();
    doc_["complete"] = true;
    write_text_file(dir_ + "/manifest.json", doc_.dump(2) + "\n");
  }

  const std::string& directory() const { return dir_; }

 private:
  std::string dir_;
  json doc_;
  std::chrono::steady_clock::time_point t0_;
};

inline json complex_json(cd z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

}  // namespace twinlat
