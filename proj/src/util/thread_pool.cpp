#include "cascadeqa/util/thread_pool.hpp"

#include <algorithm>

#include "cascadeqa/util/error.hpp"

namespace cascadeqa {
namespace {

// Chunk k of n items across w workers: [k*n/w, (k+1)*n/w).
std::pair<std::size_t, std::size_t> chunk(std::size_t n, std::size_t w, std::size_t k) {
  return {k * n / w, (k + 1) * n / w};
}

}  // namespace

WorkerPool::WorkerPool(std::size_t workers) : workers_(workers) {
  if (workers_ < 1) throw UsageError("worker count must be >= 1, got " + std::to_string(workers));
  // Worker 0 is the calling thread.
  for (std::size_t w = 1; w < workers_; ++w) threads_.emplace_back([this, w] { run(w); });
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  start_cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::parallel_for(std::size_t n,
                              const std::function<void(std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  if (workers_ == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i, 0);
    return;
  }
  {
    std::lock_guard lock(mutex_);
    body_ = &body;
    n_ = n;
    pending_ = workers_ - 1;
    error_ = nullptr;
    ++generation_;
  }
  start_cv_.notify_all();

  std::exception_ptr local;
  try {
    const auto [begin, end] = chunk(n, workers_, 0);
    for (std::size_t i = begin; i < end; ++i) body(i, 0);
  } catch (...) {
    local = std::current_exception();
  }

  std::unique_lock lock(mutex_);
  done_cv_.wait(lock, [this] { return pending_ == 0; });
  body_ = nullptr;
  if (local) std::rethrow_exception(local);
  if (error_) std::rethrow_exception(error_);
}

void WorkerPool::run(std::size_t worker) {
  std::size_t seen = 0;
  for (;;) {
    const std::function<void(std::size_t, std::size_t)>* body = nullptr;
    std::size_t n = 0;
    {
      std::unique_lock lock(mutex_);
      start_cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      body = body_;
      n = n_;
    }
    std::exception_ptr err;
    try {
      const auto [begin, end] = chunk(n, workers_, worker);
      for (std::size_t i = begin; i < end; ++i) (*body)(i, worker);
    } catch (...) {
      err = std::current_exception();
    }
    {
      std::lock_guard lock(mutex_);
      if (err && !error_) error_ = err;
      if (--pending_ == 0) done_cv_.notify_one();
    }
  }
}

}  // namespace cascadeqa
