#pragma once

#include <initializer_list>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace r2i::log {

using Value = std::variant<std::string, double, long long>;

/// One field of a structured log line. Strings containing spaces are quoted.
struct Field {
  std::string key;
  Value value;

  Field(std::string k, std::string v) : key(std::move(k)), value(std::move(v)) {}
  Field(std::string k, const char* v) : key(std::move(k)), value(std::string(v)) {}
  Field(std::string k, double v) : key(std::move(k)), value(v) {}
  Field(std::string k, float v) : key(std::move(k)), value(static_cast<double>(v)) {}
  Field(std::string k, int v) : key(std::move(k)), value(static_cast<long long>(v)) {}
  Field(std::string k, unsigned v) : key(std::move(k)), value(static_cast<long long>(v)) {}
  Field(std::string k, long v) : key(std::move(k)), value(static_cast<long long>(v)) {}
  Field(std::string k, long long v) : key(std::move(k)), value(v) {}
  Field(std::string k, unsigned long v) : key(std::move(k)), value(static_cast<long long>(v)) {}
  Field(std::string k, unsigned long long v) : key(std::move(k)), value(static_cast<long long>(v)) {}
};

enum class Level { kDebug, kInfo, kWarn, kError };

void set_level(Level level);
void set_stream(std::ostream* os);  // nullptr silences output

std::string format(Level level, std::initializer_list<Field> fields);
void write(Level level, std::initializer_list<Field> fields);

inline void info(std::initializer_list<Field> fields) { write(Level::kInfo, fields); }
inline void warn(std::initializer_list<Field> fields) { write(Level::kWarn, fields); }
inline void error(std::initializer_list<Field> fields) { write(Level::kError, fields); }
inline void debug(std::initializer_list<Field> fields) { write(Level::kDebug, fields); }

}  // namespace r2i::log
