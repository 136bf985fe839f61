#pragma once

#include "oblab/common.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace oblab {

// Fixed float formatting so reports are byte-identical across runs.
inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::string fmt_vec(const Vec& v) {
  std::string out;
  for (int i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += fmt_g(v[i]);
  }
  return out;
}

// One audited inequality: worst-case margin (RHS - LHS, >= 0 passes), the
// witness state attaining it, and any fitted constants.
struct ConditionResult {
  std::string id;
  bool pass = true;
  double margin = 0.0;
  StatePoint witness;
  double eps = 0.0;
  std::map<std::string, double> fitted;
  std::string note;
};

struct ConditionReport {
  std::vector<ConditionResult> results;

  const ConditionResult* find(const std::string& id) const {
    for (const auto& r : results)
      if (r.id == id) return &r;
    return nullptr;
  }
  bool all_pass() const {
    for (const auto& r : results)
      if (!r.pass) return false;
    return true;
  }
  void add(ConditionResult r) { results.push_back(std::move(r)); }

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    out << "id,pass,margin,eps,x,z,p,fitted,note\n";
    for (const auto& r : results) {
      std::string fitted;
      for (const auto& [k, v] : r.fitted) {
        if (!fitted.empty()) fitted += ';';
        fitted += k + "=" + fmt_g(v);
      }
      out << r.id << ',' << (r.pass ? 1 : 0) << ',' << fmt_g(r.margin) << ','
          << fmt_g(r.eps) << ',' << fmt_vec(r.witness.x) << ','
          << fmt_g(r.witness.z) << ',' << fmt_vec(r.witness.p) << ',' << fitted
          << ',' << r.note << '\n';
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : results) {
      nlohmann::json j;
      j["id"] = r.id;
      j["pass"] = r.pass;
      j["margin"] = r.margin;
      j["eps"] = r.eps;
      j["witness"] = {{"x", std::vector<double>(r.witness.x.begin(), r.witness.x.end())},
                      {"z", r.witness.z},
                      {"p", std::vector<double>(r.witness.p.begin(), r.witness.p.end())}};
      j["fitted"] = r.fitted;
      if (!r.note.empty()) j["note"] = r.note;
      arr.push_back(j);
    }
    return arr;
  }
};

// Running minimum tracker for sweep audits.
struct MarginTracker {
  double margin = std::numeric_limits<double>::infinity();
  StatePoint witness;
  double eps = 0.0;

  void update(double m, const StatePoint& s, double e = 0.0) {
    if (m < margin) {
      margin = m;
      witness = s;
      eps = e;
    }
  }
  ConditionResult result(const std::string& id, double tol = 0.0) const {
    ConditionResult r;
    r.id = id;
    r.margin = margin;
    r.pass = margin >= -tol;
    r.witness = witness;
    r.eps = eps;
    return r;
  }
};

}  // namespace oblab
