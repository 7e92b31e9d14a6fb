#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <stop_token>
#include <thread>
#include <vector>

namespace quadmppi {

/// Fixed set of threads that run one parallel_for at a time. The range is
/// split into contiguous chunks, one per worker; the calling thread takes the
/// first chunk. Work items must be independent of each other.
class WorkerPool {
 public:
  using RangeFn = std::function<void(std::size_t begin, std::size_t end)>;

  /// `workers == 0` uses the hardware concurrency.
  explicit WorkerPool(unsigned workers = 0) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    size_ = workers;
    threads_.reserve(workers - 1);
    for (unsigned i = 1; i < workers; ++i) {
      threads_.emplace_back([this, i](std::stop_token st) { worker_loop(st, i); });
    }
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() {
    for (auto& t : threads_) t.request_stop();
    {
      std::lock_guard lock(mutex_);
      ++generation_;
    }
    start_cv_.notify_all();
  }

  unsigned size() const { return size_; }

  void parallel_for(std::size_t n, const RangeFn& fn) {
    if (n == 0) return;
    if (size_ == 1 || n == 1) {
      fn(0, n);
      return;
    }
    {
      std::lock_guard lock(mutex_);
      job_ = &fn;
      job_size_ = n;
      pending_ = size_ - 1;
      error_ = nullptr;
      ++generation_;
    }
    start_cv_.notify_all();

    std::exception_ptr local;
    try {
      run_chunk(0, fn, n);
    } catch (...) {
      local = std::current_exception();
    }

    std::unique_lock lock(mutex_);
    done_cv_.wait(lock, [this] { return pending_ == 0; });
    job_ = nullptr;
    if (local) std::rethrow_exception(local);
    if (error_) std::rethrow_exception(error_);
  }

 private:
  void run_chunk(unsigned index, const RangeFn& fn, std::size_t n) const {
    const std::size_t begin = n * index / size_;
    const std::size_t end = n * (index + 1) / size_;
    if (begin < end) fn(begin, end);
  }

  void worker_loop(std::stop_token st, unsigned index) {
    std::uint64_t seen = 0;
    while (true) {
      const RangeFn* job = nullptr;
      std::size_t n = 0;
      {
        std::unique_lock lock(mutex_);
        start_cv_.wait(lock, [&] { return generation_ != seen; });
        seen = generation_;
        if (st.stop_requested()) return;
        job = job_;
        n = job_size_;
      }
      if (!job) continue;
      std::exception_ptr err;
      try {
        run_chunk(index, *job, n);
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

  unsigned size_ = 1;
  std::mutex mutex_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  const RangeFn* job_ = nullptr;
  std::size_t job_size_ = 0;
  unsigned pending_ = 0;
  std::uint64_t generation_ = 0;
  std::exception_ptr error_;
  std::vector<std::jthread> threads_;  // last member: joins before the rest is destroyed
};

}  // namespace quadmppi
