#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "scorelab/io.hpp"
#include "scorelab/rng.hpp"

using namespace scorelab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {
fs::path tmp_file(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "scorelab_io_tests";
  fs::create_directories(dir);
  return dir / name;
}
}  // namespace

TEST_SUITE("io") {

TEST_CASE("base64 known vectors") {
  auto enc = [](const std::string& s) {
    return base64_encode(reinterpret_cast<const unsigned char*>(s.data()), s.size());
  };
  CHECK(enc("Man") == "TWFu");
  CHECK(enc("Ma") == "TWE=");
  CHECK(enc("M") == "TQ==");
  CHECK(enc("") == "");
  CHECK(base64_decode("TWFu") == std::vector<unsigned char>{'M', 'a', 'n'});
  CHECK(base64_decode("TWE=") == std::vector<unsigned char>{'M', 'a'});
}

TEST_CASE("base64 round trip over many lengths") {
  Rng rng(404);
  for (int len = 0; len <= 65; ++len) {
    std::vector<unsigned char> data(len);
    for (auto& b : data) b = static_cast<unsigned char>(rng.raw() & 0xff);
    CHECK(base64_decode(base64_encode(data.data(), data.size())) == data);
  }
}

TEST_CASE("base64 rejects malformed input") {
  CHECK_THROWS(base64_decode("abc"));     // length not a multiple of 4
  CHECK_THROWS(base64_decode("a!=="));    // invalid character
  CHECK_THROWS(base64_decode("=AAA"));    // padding in front
  CHECK_THROWS(base64_decode("AA=A"));    // padding in the middle
}

TEST_CASE("text file round trip and missing-file error") {
  auto p = tmp_file("roundtrip.txt");
  write_text_file(p.string(), "line1\nline2\n");
  CHECK(read_text_file(p.string()) == "line1\nline2\n");
  CHECK_THROWS(read_text_file((p.parent_path() / "no_such_file.txt").string()));
}

TEST_CASE("toml parser covers the config subset") {
  std::string text = R"(# top comment
title = "run A"   # trailing comment
count = 42
rate = 1.5e-3
flag = true
items = [1, 2, 3]
names = ["a", "b"]

[section]
key = "value # not a comment"

[nested.inner]
x = -7
)";
  json j = parse_toml_lite(text);
  CHECK(j["title"] == "run A");
  CHECK(j["count"] == 42);
  CHECK(j["count"].is_number_integer());
  CHECK(j["rate"].get<double>() == doctest::Approx(1.5e-3));
  CHECK(j["flag"] == true);
  CHECK(j["items"] == json::array({1, 2, 3}));
  CHECK(j["names"] == json::array({"a", "b"}));
  CHECK(j["section"]["key"] == "value # not a comment");
  CHECK(j["nested"]["inner"]["x"] == -7);
}

TEST_CASE("toml parser reports the offending line") {
  try {
    parse_toml_lite("good = 1\nbad line without equals\n");
    FAIL("expected an exception");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("line") != std::string::npos);
  }
}

TEST_CASE("config loader dispatches on extension") {
  auto pt = tmp_file("cfg.toml");
  write_text_file(pt.string(), "[a]\nx = 1\n");
  auto pj = tmp_file("cfg.json");
  write_text_file(pj.string(), R"({"a": {"x": 1}})");
  CHECK(load_config_file(pt.string()) == load_config_file(pj.string()));
}

TEST_CASE("config hash is stable and content-sensitive") {
  json a = {{"x", 1}, {"y", "z"}};
  json b = {{"y", "z"}, {"x", 1}};  // same content, different insertion order
  json c = {{"x", 2}, {"y", "z"}};
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(c));
  CHECK(config_hash(a).size() == 16);
  for (char ch : config_hash(a)) CHECK(std::isxdigit(static_cast<unsigned char>(ch)));
}

TEST_CASE("manifest lists artifacts and run metadata") {
  RunManifest m;
  m.command = "train";
  m.config = {{"seed", 7}};
  m.seed = 7;
  m.wall_seconds = 1.25;
  m.artifacts = {"a.csv", "sub/b.json"};
  json j = json::parse(manifest_to_json(m));
  CHECK(j["command"] == "train");
  CHECK(j["seed"] == 7);
  CHECK(j["artifacts"] == json::array({"a.csv", "sub/b.json"}));
  CHECK(j["status"] == "complete");
  CHECK(j.contains("config_hash"));
  CHECK(j.contains("program_version"));
  CHECK(j.contains("wall_seconds"));
  auto p = tmp_file("manifest.json");
  write_manifest(m, p.string());
  CHECK(json::parse(read_text_file(p.string()))["command"] == "train");
}

}  // TEST_SUITE
