#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace niv_cli {

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

struct RunManifest {
  std::vector<std::string> argv;
  std::string command;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  unsigned long long seed = 0;
  int threads = 0;
  nlohmann::json settings = nlohmann::json::object();
  nlohmann::json results = nlohmann::json::object();

  nlohmann::json to_json() const;
  void write(const std::string& path) const;
};

}  // namespace niv_cli
