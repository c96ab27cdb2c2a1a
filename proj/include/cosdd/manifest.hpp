#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cosdd {

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_text(std::string_view text);

// Run record written next to every CLI output: command line, resolved
// parameters and hashes of everything read and written.
class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> argv);

  nlohmann::json& parameters() { return parameters_; }
  // Directories are expanded to every regular file below them.
  void add_input(const std::filesystem::path& path);
  void add_artifact(const std::filesystem::path& path);

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  std::vector<std::string> argv_;
  nlohmann::json parameters_ = nlohmann::json::object();
  nlohmann::json inputs_ = nlohmann::json::array();
  nlohmann::json artifacts_ = nlohmann::json::array();
};

}  // namespace cosdd
