#pragma once

#include <chrono>
#include <cstdio>
#include <exception>
#include <functional>
#include <string>

namespace dnsd::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Runner {
 public:
  /// Runs one criterion; a thrown exception or a blown time budget counts as a failure.
  void run(int id, const char* title, double budget_seconds, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > budget_seconds) {
      o.pass = false;
      o.detail += "; over time budget";
    }
    std::printf("[%s] criterion %d: %s | %s | %.1fs (budget %.0fs)\n", o.pass ? "PASS" : "FAIL", id, title,
                o.detail.c_str(), secs, budget_seconds);
    std::fflush(stdout);
    failures_ += !o.pass;
  }

  int failures() const { return failures_; }

 private:
  int failures_ = 0;
};

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace dnsd::acceptance
