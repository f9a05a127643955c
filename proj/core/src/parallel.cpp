#include "amisr/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace amisr {

namespace {

int env_workers() {
  if (const char* s = std::getenv("AMISR_THREADS")) {
    try {
      return std::max(1, std::stoi(s));
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

bool env_deterministic() {
  const char* s = std::getenv("AMISR_DETERMINISTIC");
  return s != nullptr && std::string(s) == "1";
}

std::atomic<int> g_workers{env_workers()};
std::atomic<bool> g_deterministic{env_deterministic()};

}  // namespace

int worker_count() { return g_workers.load(); }
void set_worker_count(int n) { g_workers.store(std::max(1, n)); }

bool deterministic_mode() { return g_deterministic.load(); }
void set_deterministic(bool on) { g_deterministic.store(on); }

void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
  const int64_t workers = std::min<int64_t>(worker_count(), n);
  if (workers <= 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int64_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int64_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (int64_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace amisr
