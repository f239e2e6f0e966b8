#include "snvt/threads.hpp"

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace snvt {

std::size_t thread_budget() {
  std::size_t budget = 0;
  if (const char* env = std::getenv("SNVT_THREADS")) {
    try {
      budget = static_cast<std::size_t>(std::stoul(env));
    } catch (...) {
      budget = 0;
    }
  }
  if (budget == 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    budget = hw ? hw : 1;
  }
  return budget;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(thread_budget(), n);
  if (workers <= 1 || n < 4) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace snvt
