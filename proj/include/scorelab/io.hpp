#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace scorelab {

std::string base64_encode(const unsigned char* data, size_t len);
std::vector<unsigned char> base64_decode(const std::string& text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Minimal TOML reader covering the config subset used here: [section] and
// [a.b] headers, key = value with strings, integers, floats, booleans, and
// flat arrays of those, plus # comments.  Result is a JSON object mirroring
// the table structure.
nlohmann::json parse_toml_lite(const std::string& text);

// Loads a config file; .toml goes through parse_toml_lite, everything else
// is parsed as JSON.
nlohmann::json load_config_file(const std::string& path);

// FNV-1a over the canonical (sorted-key) JSON dump, hex-encoded.
std::string config_hash(const nlohmann::json& config);

// Run manifest: one per CLI invocation, listing every artifact the run wrote.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  uint64_t seed = 0;
  double wall_seconds = 0.0;
  std::vector<std::string> artifacts;
  std::string status = "complete";  // "incomplete" marks aborted runs
};

std::string manifest_to_json(const RunManifest& m);
void write_manifest(const RunManifest& m, const std::string& path);

}  // namespace scorelab
