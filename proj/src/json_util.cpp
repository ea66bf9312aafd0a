#include "crowdfuse/json_util.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "crowdfuse/errors.hpp"

namespace crowdfuse::jsonio {
namespace {

void escape_string(const std::string& s, std::string& out) {
  out += '"';
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  out += '"';
}

void emit_value(const nlohmann::json& j, std::string& out) {
  switch (j.type()) {
    case nlohmann::json::value_t::null:
      out += "null";
      break;
    case nlohmann::json::value_t::boolean:
      out += j.get<bool>() ? "true" : "false";
      break;
    case nlohmann::json::value_t::number_integer:
      out += std::to_string(j.get<std::int64_t>());
      break;
    case nlohmann::json::value_t::number_unsigned:
      out += std::to_string(j.get<std::uint64_t>());
      break;
    case nlohmann::json::value_t::number_float:
      out += format_double(j.get<double>());
      break;
    case nlohmann::json::value_t::string:
      escape_string(j.get_ref<const std::string&>(), out);
      break;
    case nlohmann::json::value_t::array: {
      out += '[';
      bool first = true;
      for (const auto& item : j) {
        if (!first) out += ',';
        first = false;
        emit_value(item, out);
      }
      out += ']';
      break;
    }
    case nlohmann::json::value_t::object: {
      // nlohmann's default object is key-ordered already; emitting through
      // items() keeps that order explicit.
      out += '{';
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) out += ',';
        first = false;
        escape_string(key, out);
        out += ':';
        emit_value(value, out);
      }
      out += '}';
      break;
    }
    default:
      throw Error(Errc::SchemaError, "cannot emit binary/discarded JSON value");
  }
}

std::pair<int, int> line_of_offset(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

} // namespace

std::string format_double(double v) {
  if (!std::isfinite(v))
    throw Error(Errc::SchemaError, "non-finite number in output");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string emit(const nlohmann::json& j) {
  std::string out;
  emit_value(j, out);
  return out;
}

nlohmann::json parse_string(const std::string& text, const std::string& origin) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    auto [line, col] = line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0);
    std::ostringstream msg;
    msg << origin << ":" << line << ":" << col << ": " << e.what();
    throw Error(Errc::SchemaError, msg.str());
  }
}

nlohmann::json parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(Errc::SchemaError, path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path);
}

void write_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(Errc::SchemaError, path + ": cannot open for writing");
  out << emit(j) << '\n';
  if (!out)
    throw Error(Errc::SchemaError, path + ": write failed");
}

const nlohmann::json& require(const nlohmann::json& obj, const char* key,
                              const std::string& ctx) {
  if (!obj.is_object())
    throw Error(Errc::SchemaError, ctx + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end())
    throw Error(Errc::SchemaError, ctx + ": missing field '" + key + "'");
  return *it;
}

std::string require_string(const nlohmann::json& obj, const char* key,
                           const std::string& ctx) {
  const auto& v = require(obj, key, ctx);
  if (!v.is_string())
    throw Error(Errc::SchemaError, ctx + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

double require_number(const nlohmann::json& obj, const char* key,
                      const std::string& ctx) {
  const auto& v = require(obj, key, ctx);
  if (!v.is_number())
    throw Error(Errc::SchemaError, ctx + ": field '" + key + "' must be a number");
  return v.get<double>();
}

std::int64_t require_int(const nlohmann::json& obj, const char* key,
                         const std::string& ctx) {
  const auto& v = require(obj, key, ctx);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw Error(Errc::SchemaError, ctx + ": field '" + key + "' must be an integer");
  return v.get<std::int64_t>();
}

double opt_number(const nlohmann::json& obj, const char* key, double fallback) {
  if (!obj.is_object()) return fallback;
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_number())
    throw Error(Errc::SchemaError, std::string("field '") + key + "' must be a number");
  return it->get<double>();
}

std::int64_t opt_int(const nlohmann::json& obj, const char* key,
                     std::int64_t fallback) {
  if (!obj.is_object()) return fallback;
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_number_integer() && !it->is_number_unsigned())
    throw Error(Errc::SchemaError, std::string("field '") + key + "' must be an integer");
  return it->get<std::int64_t>();
}

bool opt_bool(const nlohmann::json& obj, const char* key, bool fallback) {
  if (!obj.is_object()) return fallback;
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_boolean())
    throw Error(Errc::SchemaError, std::string("field '") + key + "' must be a boolean");
  return it->get<bool>();
}

} // namespace crowdfuse::jsonio
