#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hardylab/space.hpp"

namespace hardylab {

// ---------------------------------------------------------------------------
// Flat key-value config with [kind name] sections, parsed line by line so
// errors can name the offending line.
// ---------------------------------------------------------------------------
struct ConfigSection {
  std::string kind;
  std::string name;
  int line = 0;
  std::map<std::string, std::string> keys;
  std::map<std::string, int> key_lines;
};

struct Config {
  std::map<std::string, std::string> globals;
  std::vector<ConfigSection> sections;
  std::string source;
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace ioutil {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace ioutil

inline Config parse_config(const std::string& text, const std::string& origin = "<config>") {
  Config cfg;
  cfg.source = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  ConfigSection* cur = nullptr;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = ioutil::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": unterminated section header");
      std::string inner = ioutil::trim(t.substr(1, t.size() - 2));
      std::istringstream hs(inner);
      ConfigSection sec;
      hs >> sec.kind >> sec.name;
      if (sec.kind.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section header");
      if (sec.name.empty()) sec.name = sec.kind;
      sec.line = lineno;
      cfg.sections.push_back(sec);
      cur = &cfg.sections.back();
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = ioutil::trim(t.substr(0, eq));
    std::string val = ioutil::trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (cur) {
      cur->keys[key] = val;
      cur->key_lines[key] = lineno;
    } else {
      cfg.globals[key] = val;
    }
  }
  return cfg;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

inline std::string section_get(const ConfigSection& sec, const std::string& key) {
  auto it = sec.keys.find(key);
  if (it == sec.keys.end())
    throw ConfigError("section [" + sec.kind + " " + sec.name + "] (line " +
                      std::to_string(sec.line) + "): missing key '" + key + "'");
  return it->second;
}

inline std::string section_get(const ConfigSection& sec, const std::string& key,
                               const std::string& fallback) {
  auto it = sec.keys.find(key);
  return it == sec.keys.end() ? fallback : it->second;
}

inline double section_double(const ConfigSection& sec, const std::string& key) {
  std::string v = section_get(sec, key);
  try {
    std::size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("section [" + sec.kind + " " + sec.name + "] key '" + key +
                      "': not a number: " + v);
  }
}

inline double section_double(const ConfigSection& sec, const std::string& key, double fallback) {
  return sec.keys.count(key) ? section_double(sec, key) : fallback;
}

inline int section_int(const ConfigSection& sec, const std::string& key, int fallback) {
  if (!sec.keys.count(key)) return fallback;
  return static_cast<int>(section_double(sec, key));
}

// ---------------------------------------------------------------------------
// CSV round-trips.
// ---------------------------------------------------------------------------
inline void write_field_csv(const std::string& path, const Field& f) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "id,value\n";
  for (int i = 0; i < f.size(); ++i) out << i << "," << ioutil::fmt(f[i]) << "\n";
}

inline Field read_field_csv(const std::string& path, const DiscreteSpace& space) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  Field f(space);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (ioutil::trim(line).empty()) continue;
    std::size_t comma = line.find(',');
    int id = std::stoi(line.substr(0, comma));
    if (id < 0 || id >= space.size())
      throw std::runtime_error(path + ": point id out of range: " + std::to_string(id));
    f[id] = std::stod(line.substr(comma + 1));
  }
  return f;
}

// explicit-table space: id,x[,y[,z]],weight (+ optional distance triples i,j,d)
inline DiscreteSpace read_space_csv(const std::string& points_path,
                                    const std::string& dist_path = "") {
  std::ifstream in(points_path);
  if (!in) throw std::runtime_error("cannot read " + points_path);
  std::vector<std::vector<double>> coords;
  std::vector<double> weights;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (ioutil::trim(line).empty()) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
    if (cells.size() < 3) throw std::runtime_error(points_path + ": need id,coords...,weight");
    coords.emplace_back(cells.begin() + 1, cells.end() - 1);
    weights.push_back(cells.back());
  }
  if (dist_path.empty()) return DiscreteSpace::from_table(coords, weights);

  std::ifstream din(dist_path);
  if (!din) throw std::runtime_error("cannot read " + dist_path);
  int n = static_cast<int>(weights.size());
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  std::getline(din, line);
  while (std::getline(din, line)) {
    if (ioutil::trim(line).empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
    if (cells.size() != 3) throw std::runtime_error(dist_path + ": need i,j,dist rows");
    int i = static_cast<int>(cells[0]), j = static_cast<int>(cells[1]);
    dist[i][j] = cells[2];
  }
  // distance CSV carries one triangle; mirror missing entries before the
  // symmetry audit in from_table
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (dist[i][j] == 0.0 && dist[j][i] != 0.0) dist[i][j] = dist[j][i];
  return DiscreteSpace::from_table(coords, weights, &dist);
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace hardylab
