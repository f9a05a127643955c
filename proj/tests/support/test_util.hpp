#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "amisr/params.hpp"
#include "amisr/rng.hpp"
#include "amisr/tensor.hpp"

namespace testutil {

template <typename T = double>
amisr::Tensor<T> randn(const amisr::Shape& s, amisr::Rng& rng, double stddev = 1.0) {
  amisr::Tensor<T> t(s);
  for (T& v : t.mutable_data()) v = static_cast<T>(stddev * rng.normal());
  return t;
}

template <typename T>
void fill(amisr::ParamStore<T>& store, T value) {
  for (auto& e : store.entries())
    for (T& v : e.value.mutable_data()) v = value;
}

template <typename T>
void randomize(amisr::ParamStore<T>& store, amisr::Rng& rng, double stddev) {
  for (auto& e : store.entries())
    for (T& v : e.value.mutable_data()) v = static_cast<T>(stddev * rng.normal());
}

template <typename T>
double inner(const amisr::Tensor<T>& a, const amisr::Tensor<T>& b) {
  double s = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) s += double(a.data()[i]) * double(b.data()[i]);
  return s;
}

// Fresh directory under the system temp dir, removed at scope exit.
class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = std::filesystem::temp_directory_path() /
            ("amisr_" + std::string(info ? info->test_suite_name() : "t") + "_" + (info ? info->name() : "x"));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
