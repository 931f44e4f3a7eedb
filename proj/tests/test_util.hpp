#pragma once

#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>

#include "exaq/error.hpp"

namespace exaq::test {

// Fresh per-test scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("exaq_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

}  // namespace exaq::test

#define CHECK_ERROR_CODE(expr, expected_code)            \
  do {                                                   \
    bool thrown_ = false;                                \
    try {                                                \
      (void)(expr);                                      \
    } catch (const ::exaq::Error& e_) {                  \
      thrown_ = true;                                    \
      CHECK(e_.code() == (expected_code));               \
    }                                                    \
    CHECK_MESSAGE(thrown_, "expected exaq::Error");      \
  } while (0)
