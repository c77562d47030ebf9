#include "cyclepose/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace cyclepose::config {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

Table::Value parseScalar(const std::string& tok_in) {
  const std::string tok = trim(tok_in);
  if (tok.size() >= 2 && tok.front() == '"' && tok.back() == '"')
    return tok.substr(1, tok.size() - 2);
  if (tok == "true") return true;
  if (tok == "false") return false;
  // Integer if it parses cleanly without '.', 'e', or "inf"/"nan".
  if (tok.find_first_of(".eE") == std::string::npos && tok != "inf" && tok != "-inf") {
    try {
      size_t pos = 0;
      int64_t v = std::stoll(tok, &pos);
      if (pos == tok.size()) return v;
    } catch (...) {}
  }
  try {
    size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos == tok.size()) return v;
  } catch (...) {}
  return tok;  // bare string
}

std::vector<std::string> splitTopLevel(const std::string& body) {
  std::vector<std::string> out;
  std::string cur;
  bool in_str = false;
  for (char c : body) {
    if (c == '"') in_str = !in_str;
    if (c == ',' && !in_str) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) out.push_back(cur);
  return out;
}

}  // namespace

Table Table::parseString(const std::string& text) {
  Table t;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // Strip comments outside strings.
    bool in_str = false;
    for (size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_str = !in_str;
      if (line[i] == '#' && !in_str) { line.resize(i); break; }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string rhs = trim(line.substr(eq + 1));
    if (key.empty() || rhs.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");

    if (rhs.front() == '[') {
      if (rhs.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": unterminated array");
      const auto toks = splitTopLevel(rhs.substr(1, rhs.size() - 2));
      bool numeric = true;
      for (const auto& tk : toks) {
        const auto v = parseScalar(tk);
        if (!std::holds_alternative<int64_t>(v) && !std::holds_alternative<double>(v))
          numeric = false;
      }
      if (numeric) {
        std::vector<double> nums;
        for (const auto& tk : toks) {
          const auto v = parseScalar(tk);
          nums.push_back(std::holds_alternative<int64_t>(v)
                             ? static_cast<double>(std::get<int64_t>(v))
                             : std::get<double>(v));
        }
        t.sections_[section][key] = nums;
      } else {
        std::vector<std::string> strs;
        for (const auto& tk : toks) {
          const auto v = parseScalar(tk);
          strs.push_back(std::holds_alternative<std::string>(v) ? std::get<std::string>(v)
                                                                : trim(tk));
        }
        t.sections_[section][key] = strs;
      }
    } else {
      t.sections_[section][key] = parseScalar(rhs);
    }
  }
  return t;
}

Table Table::parseFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parseString(ss.str());
}

const Table::Value* Table::find(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

bool Table::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

int64_t Table::getInt(const std::string& s, const std::string& k, int64_t def) const {
  const Value* v = find(s, k);
  if (!v) return def;
  if (std::holds_alternative<int64_t>(*v)) return std::get<int64_t>(*v);
  if (std::holds_alternative<double>(*v)) return static_cast<int64_t>(std::get<double>(*v));
  throw ConfigError("config [" + s + "]." + k + ": expected integer");
}

double Table::getDouble(const std::string& s, const std::string& k, double def) const {
  const Value* v = find(s, k);
  if (!v) return def;
  if (std::holds_alternative<int64_t>(*v)) return static_cast<double>(std::get<int64_t>(*v));
  if (std::holds_alternative<double>(*v)) return std::get<double>(*v);
  throw ConfigError("config [" + s + "]." + k + ": expected number");
}

bool Table::getBool(const std::string& s, const std::string& k, bool def) const {
  const Value* v = find(s, k);
  if (!v) return def;
  if (std::holds_alternative<bool>(*v)) return std::get<bool>(*v);
  throw ConfigError("config [" + s + "]." + k + ": expected bool");
}

std::string Table::getString(const std::string& s, const std::string& k,
                             const std::string& def) const {
  const Value* v = find(s, k);
  if (!v) return def;
  if (std::holds_alternative<std::string>(*v)) return std::get<std::string>(*v);
  throw ConfigError("config [" + s + "]." + k + ": expected string");
}

std::vector<double> Table::getDoubles(const std::string& s, const std::string& k) const {
  const Value* v = find(s, k);
  if (!v) return {};
  if (std::holds_alternative<std::vector<double>>(*v)) return std::get<std::vector<double>>(*v);
  if (std::holds_alternative<int64_t>(*v)) return {static_cast<double>(std::get<int64_t>(*v))};
  if (std::holds_alternative<double>(*v)) return {std::get<double>(*v)};
  throw ConfigError("config [" + s + "]." + k + ": expected numeric array");
}

std::vector<std::string> Table::getStrings(const std::string& s, const std::string& k) const {
  const Value* v = find(s, k);
  if (!v) return {};
  if (std::holds_alternative<std::vector<std::string>>(*v))
    return std::get<std::vector<std::string>>(*v);
  if (std::holds_alternative<std::string>(*v)) return {std::get<std::string>(*v)};
  throw ConfigError("config [" + s + "]." + k + ": expected string array");
}

void Table::set(const std::string& section, const std::string& key, Value v) {
  sections_[section][key] = std::move(v);
}

std::string Table::dump() const {
  std::ostringstream out;
  out.precision(17);
  for (const auto& [sec, kv] : sections_) {
    if (!sec.empty()) out << "[" << sec << "]\n";
    for (const auto& [key, val] : kv) {
      out << key << " = ";
      std::visit(
          [&out](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::string>) {
              out << '"' << v << '"';
            } else if constexpr (std::is_same_v<T, bool>) {
              out << (v ? "true" : "false");
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
              out << "[";
              for (size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << v[i];
              out << "]";
            } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
              out << "[";
              for (size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << '"' << v[i] << '"';
              out << "]";
            } else {
              out << v;
            }
          },
          val);
      out << "\n";
    }
  }
  return out.str();
}

uint64_t Table::contentHash() const {
  const std::string s = dump();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace cyclepose::config
