#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace crowdfuse::jsonio {

// Canonical text form: object keys sorted, floats via %.9g, no trailing
// spaces, single newline at the end of a file. Re-emitting a parsed
// document reproduces the bytes, which is what the determinism checks
// compare.
std::string format_double(double v);
std::string emit(const nlohmann::json& j);

nlohmann::json parse_string(const std::string& text, const std::string& origin);
nlohmann::json parse_file(const std::string& path);
void write_file(const std::string& path, const nlohmann::json& j);

// Schema accessors. All throw Error(SchemaError) with the key path.
const nlohmann::json& require(const nlohmann::json& obj, const char* key,
                              const std::string& ctx);
std::string require_string(const nlohmann::json& obj, const char* key,
                           const std::string& ctx);
double require_number(const nlohmann::json& obj, const char* key,
                      const std::string& ctx);
std::int64_t require_int(const nlohmann::json& obj, const char* key,
                         const std::string& ctx);
double opt_number(const nlohmann::json& obj, const char* key, double fallback);
std::int64_t opt_int(const nlohmann::json& obj, const char* key,
                     std::int64_t fallback);
bool opt_bool(const nlohmann::json& obj, const char* key, bool fallback);

} // namespace crowdfuse::jsonio
