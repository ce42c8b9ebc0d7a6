#include "pfrs/harness.hpp"

#include <json.hpp>

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace pfrs {

using nlohmann::json;

namespace {

void flatten(const json& j, const std::string& prefix, std::map<std::string, std::string>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    }
    return;
  }
  if (prefix.empty()) throw Error(ErrorCode::kUsageError, "run config must be an object");
  out[prefix] = j.dump();
}

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (c == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

bool valid_key(const std::string& k) {
  if (k.empty() || k.front() == '.' || k.back() == '.') return false;
  for (char c : k) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  }
  return true;
}

class TomlValueParser {
 public:
  TomlValueParser(const std::string& text, int line) : s_(text), line_(line) {}

  json parse() {
    json v = value();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorCode::kUsageError, "config line " + std::to_string(line_) + ": " + why);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  json value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return string_value();
    if (c == '[') return array_value();
    if (s_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      return true;
    }
    if (s_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      return false;
    }
    return number_value();
  }

  json string_value() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) fail("bad escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  json array_value() {
    ++pos_;
    json arr = json::array();
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return arr;
    }
    while (true) {
      json v = value();
      if (v.is_array()) fail("nested arrays are not supported");
      arr.push_back(std::move(v));
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ']') {
          ++pos_;
          return arr;
        }
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        return arr;
      }
      fail("expected ',' or ']'");
    }
  }

  json number_value() {
    std::size_t end = pos_;
    while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '.' ||
                               s_[end] == '+' || s_[end] == '-' || s_[end] == '_')) {
      ++end;
    }
    std::string tok;
    for (std::size_t i = pos_; i < end; ++i) {
      if (s_[i] != '_') tok.push_back(s_[i]);
    }
    if (tok.empty()) fail("expected a value");
    std::string digits = tok.front() == '+' ? tok.substr(1) : tok;
    pos_ = end;
    const bool is_float = digits.find_first_of(".eE") != std::string::npos;
    const char* b = digits.data();
    const char* e = b + digits.size();
    if (is_float) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(b, e, v);
      if (ec != std::errc() || p != e) fail("bad number '" + tok + "'");
      return v;
    }
    long long v = 0;
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) fail("bad value '" + tok + "'");
    return v;
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int line_;
};

json parse_toml_subset(const std::string& text) {
  json root = json::object();
  std::string table;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw Error(ErrorCode::kUsageError, "config line " + std::to_string(line_no) + ": bad table header");
      }
      table = trim(line.substr(1, line.size() - 2));
      if (!valid_key(table)) {
        throw Error(ErrorCode::kUsageError, "config line " + std::to_string(line_no) + ": bad table name");
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kUsageError, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (!valid_key(key)) {
      throw Error(ErrorCode::kUsageError, "config line " + std::to_string(line_no) + ": bad key '" + key + "'");
    }
    const std::string path = table.empty() ? key : table + "." + key;
    json value = TomlValueParser(trim(line.substr(eq + 1)), line_no).parse();
    json* node = &root;
    std::size_t start = 0;
    while (true) {
      const std::size_t dot = path.find('.', start);
      const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (dot == std::string::npos) {
        if (node->contains(part)) {
          throw Error(ErrorCode::kUsageError, "config line " + std::to_string(line_no) + ": duplicate key " + path);
        }
        (*node)[part] = std::move(value);
        break;
      }
      json& child = (*node)[part];
      if (child.is_null()) child = json::object();
      if (!child.is_object()) {
        throw Error(ErrorCode::kUsageError, "config line " + std::to_string(line_no) + ": " + part + " is not a table");
      }
      node = &child;
      start = dot + 1;
    }
  }
  return root;
}

json value_of(const std::map<std::string, std::string>& values, const std::string& key) {
  return json::parse(values.at(key));
}

[[noreturn]] void type_error(const std::string& key, const char* want) {
  throw Error(ErrorCode::kUsageError, "config key '" + key + "' must be " + want);
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  const std::string body = trim(text);
  json root;
  if (!body.empty() && body.front() == '{') {
    try {
      root = json::parse(body);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kUsageError, std::string("bad JSON config: ") + e.what());
    }
  } else {
    root = parse_toml_subset(text);
  }
  if (!root.is_object()) throw Error(ErrorCode::kUsageError, "run config must be an object");
  flatten(root, "", cfg.values_);
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  const json v = value_of(values_, key);
  if (!v.is_number()) type_error(key, "a number");
  return v.get<double>();
}

int RunConfig::get_int(const std::string& key, int fallback) const {
  if (!has(key)) return fallback;
  const json v = value_of(values_, key);
  if (!v.is_number_integer()) type_error(key, "an integer");
  return v.get<int>();
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
  if (!has(key)) return fallback;
  const json v = value_of(values_, key);
  if (!v.is_string()) type_error(key, "a string");
  return v.get<std::string>();
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const json v = value_of(values_, key);
  if (!v.is_boolean()) type_error(key, "a boolean");
  return v.get<bool>();
}

std::vector<double> RunConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  if (!has(key)) return fallback;
  const json v = value_of(values_, key);
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) type_error(key, "a list of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) type_error(key, "a list of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

void RunConfig::set_json(const std::string& key, const std::string& json_value) {
  values_[key] = json::parse(json_value).dump();
}

void RunConfig::set_double(const std::string& key, double v) { values_[key] = json(v).dump(); }

void RunConfig::set_string(const std::string& key, const std::string& v) { values_[key] = json(v).dump(); }

void RunConfig::set_doubles(const std::string& key, const std::vector<double>& v) { values_[key] = json(v).dump(); }

std::string RunConfig::canonical() const {
  json j = json::object();
  for (const auto& [k, v] : values_) j[k] = json::parse(v);
  return j.dump();
}

std::string RunConfig::hash() const { return hex64(fnv1a64(canonical())); }

}  // namespace pfrs
