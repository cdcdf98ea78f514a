#include "r2i/util/log.hpp"

#include <cstdio>
#include <iostream>
#include <mutex>
#include <sstream>

namespace r2i::log {

namespace {
Level g_level = Level::kInfo;
std::ostream* g_stream = &std::cerr;
std::mutex g_mutex;

const char* level_name(Level l) {
  switch (l) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarn: return "warn";
    case Level::kError: return "error";
  }
  return "?";
}
}  // namespace

void set_level(Level level) { g_level = level; }
void set_stream(std::ostream* os) { g_stream = os; }

std::string format(Level level, std::initializer_list<Field> fields) {
  std::ostringstream os;
  os << "level=" << level_name(level);
  for (const auto& f : fields) {
    os << ' ' << f.key << '=';
    if (const auto* s = std::get_if<std::string>(&f.value)) {
      if (s->find_first_of(" \t\"=") != std::string::npos) {
        os << '"';
        for (char c : *s) os << (c == '"' ? "\\\"" : std::string(1, c));
        os << '"';
      } else {
        os << *s;
      }
    } else if (const auto* d = std::get_if<double>(&f.value)) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6g", *d);
      os << buf;
    } else {
      os << std::get<long long>(f.value);
    }
  }
  return os.str();
}

void write(Level level, std::initializer_list<Field> fields) {
  if (level < g_level || g_stream == nullptr) return;
  std::string line = format(level, fields);
  std::lock_guard lock(g_mutex);
  *g_stream << line << '\n';
}

}  // namespace r2i::log
