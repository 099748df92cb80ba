#pragma once

#include <cstdarg>
#include <cstdio>
#include <string>

// One pass/fail line per checked condition, plus a summary line; the exit
// code feeds ctest.
struct CriterionReport {
  int number;
  bool ok = true;

  void check(bool pass, const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    std::printf("[criterion %d] %s %s\n", number, pass ? "PASS" : "FAIL", buf);
    std::fflush(stdout);
    ok = ok && pass;
  }

  void note(const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    std::printf("[criterion %d] note: %s\n", number, buf);
    std::fflush(stdout);
  }

  int finish() const {
    std::printf("[criterion %d] %s\n", number, ok ? "PASS" : "FAIL");
    std::fflush(stdout);
    return ok ? 0 : 1;
  }
};
