#include "scorelab/io.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace scorelab {

namespace {
const char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}
}  // namespace

std::string base64_encode(const unsigned char* data, size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (size_t i = 0; i < len; i += 3) {
    uint32_t chunk = static_cast<uint32_t>(data[i]) << 16;
    int have = 1;
    if (i + 1 < len) {
      chunk |= static_cast<uint32_t>(data[i + 1]) << 8;
      have = 2;
    }
    if (i + 2 < len) {
      chunk |= data[i + 2];
      have = 3;
    }
    out.push_back(kB64[(chunk >> 18) & 63]);
    out.push_back(kB64[(chunk >> 12) & 63]);
    out.push_back(have >= 2 ? kB64[(chunk >> 6) & 63] : '=');
    out.push_back(have == 3 ? kB64[chunk & 63] : '=');
  }
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw std::invalid_argument("base64: length must be a multiple of 4");
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  for (size_t i = 0; i < text.size(); i += 4) {
    uint32_t chunk = 0;
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      char c = text[i + k];
      if (c == '=') {
        if (i + 4 != text.size() || k < 2) throw std::invalid_argument("base64: bad padding");
        ++pad;
        chunk <<= 6;
        continue;
      }
      int v = b64_value(c);
      if (v < 0 || pad > 0) throw std::invalid_argument("base64: bad character");
      chunk = (chunk << 6) | static_cast<uint32_t>(v);
    }
    out.push_back(static_cast<unsigned char>((chunk >> 16) & 0xff));
    if (pad < 2) out.push_back(static_cast<unsigned char>((chunk >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<unsigned char>(chunk & 0xff));
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

// --- TOML subset ------------------------------------------------------------

namespace {

std::string strip(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// removes a trailing comment that is not inside a quoted string
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

nlohmann::json parse_scalar(const std::string& tok) {
  if (tok.size() >= 2 && tok.front() == '"' && tok.back() == '"') {
    std::string out;
    for (size_t i = 1; i + 1 < tok.size(); ++i) {
      char c = tok[i];
      if (c == '\\' && i + 2 < tok.size()) {
        char n = tok[++i];
        if (n == 'n') out.push_back('\n');
        else if (n == 't') out.push_back('\t');
        else out.push_back(n);
      } else {
        out.push_back(c);
      }
    }
    return out;
  }
  if (tok == "true") return true;
  if (tok == "false") return false;
  // integer if it parses fully as one, else float
  try {
    size_t pos = 0;
    long long v = std::stoll(tok, &pos);
    if (pos == tok.size()) return v;
  } catch (...) {
  }
  try {
    size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos == tok.size()) return v;
  } catch (...) {
  }
  throw std::invalid_argument("toml: cannot parse value '" + tok + "'");
}

nlohmann::json parse_value(const std::string& raw) {
  std::string tok = strip(raw);
  if (tok.empty()) throw std::invalid_argument("toml: empty value");
  if (tok.front() == '[') {
    if (tok.back() != ']') throw std::invalid_argument("toml: unterminated array");
    nlohmann::json arr = nlohmann::json::array();
    std::string inner = tok.substr(1, tok.size() - 2);
    std::string cur;
    bool quoted = false;
    for (char c : inner) {
      if (c == '"') quoted = !quoted;
      if (c == ',' && !quoted) {
        if (!strip(cur).empty()) arr.push_back(parse_scalar(strip(cur)));
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!strip(cur).empty()) arr.push_back(parse_scalar(strip(cur)));
    return arr;
  }
  return parse_scalar(tok);
}

}  // namespace

nlohmann::json parse_toml_lite(const std::string& text) {
  nlohmann::json root = nlohmann::json::object();
  nlohmann::json* table = &root;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = strip(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw std::invalid_argument("toml: bad table header at line " + std::to_string(lineno));
      std::string name = strip(s.substr(1, s.size() - 2));
      table = &root;
      std::istringstream parts(name);
      std::string part;
      while (std::getline(parts, part, '.')) {
        part = strip(part);
        if (part.empty())
          throw std::invalid_argument("toml: empty table name at line " + std::to_string(lineno));
        table = &(*table)[part];
        if (table->is_null()) *table = nlohmann::json::object();
      }
      continue;
    }
    size_t eq = std::string::npos;
    bool quoted = false;
    for (size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '=' && !quoted) {
        eq = i;
        break;
      }
    }
    if (eq == std::string::npos)
      throw std::invalid_argument("toml: expected key = value at line " + std::to_string(lineno));
    std::string key = strip(s.substr(0, eq));
    if (key.empty())
      throw std::invalid_argument("toml: empty key at line " + std::to_string(lineno));
    (*table)[key] = parse_value(s.substr(eq + 1));
  }
  return root;
}

nlohmann::json load_config_file(const std::string& path) {
  std::string text = read_text_file(path);
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".toml") return parse_toml_lite(text);
  return nlohmann::json::parse(text);
}

std::string config_hash(const nlohmann::json& config) {
  std::string canon = config.dump();  // nlohmann objects iterate in sorted key order
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string manifest_to_json(const RunManifest& m) {
  nlohmann::json j;
  j["command"] = m.command;
  j["config"] = m.config;
  j["config_hash"] = config_hash(m.config);
  j["seed"] = m.seed;
  j["wall_seconds"] = m.wall_seconds;
  j["artifacts"] = m.artifacts;
  j["status"] = m.status;
  j["program_version"] = "scorelab 1.0.0";
#if defined(__clang__)
  j["compiler"] = std::string("clang ") + __VERSION__;
#elif defined(__GNUC__)
  j["compiler"] = std::string("gcc ") + __VERSION__;
#else
  j["compiler"] = "unknown";
#endif
  return j.dump(2);
}

void write_manifest(const RunManifest& m, const std::string& path) {
  write_text_file(path, manifest_to_json(m));
}

}  // namespace scorelab
