#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include "json.hpp"

namespace sliceforge::tools {

// nlohmann::json prints the shortest round-trip form of a double; reports
// use a fixed 17 significant digits instead so that every field has the
// same shape.
inline void write_number(std::string& out, double v) {
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
  // Keep it a JSON number that still reads back as floating point.
  const std::string_view s(buf);
  if (s.find_first_of(".eEn") == std::string_view::npos) out += ".0";
}

inline void write_json(std::string& out, const nlohmann::json& j, int indent, int depth) {
  const auto pad = [&](int d) { out.append(static_cast<std::size_t>(d * indent), ' '); };
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        pad(depth + 1);
        out += nlohmann::json(it.key()).dump();
        out += ": ";
        write_json(out, it.value(), indent, depth + 1);
      }
      out += "\n";
      pad(depth);
      out += "}";
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        pad(depth + 1);
        write_json(out, j[i], indent, depth + 1);
      }
      out += "\n";
      pad(depth);
      out += "]";
      return;
    }
    case nlohmann::json::value_t::number_float:
      write_number(out, j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

inline std::string to_report_text(const nlohmann::json& j) {
  std::string out;
  write_json(out, j, 2, 0);
  out += "\n";
  return out;
}

}  // namespace sliceforge::tools
