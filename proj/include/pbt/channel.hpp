#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <mutex>
#include <vector>

namespace pbt {

/// Bounded multiple-producer single-consumer queue.
///
/// Producers use try_push and decide themselves what to do while the queue
/// is full (the builder drains its own inbox meanwhile, which rules out
/// cyclic waits between workers).
template <class T>
class BoundedChannel {
 public:
  explicit BoundedChannel(std::size_t capacity) : slots_(capacity == 0 ? 1 : capacity) {}

  std::size_t capacity() const noexcept { return slots_.size(); }

  bool try_push(const T& item) {
    {
      std::lock_guard lock(mu_);
      if (closed_ || size_ == slots_.size()) return false;
      slots_[(head_ + size_) % slots_.size()] = item;
      ++size_;
    }
    not_empty_.notify_one();
    return true;
  }

  /// Moves every queued item into `f`; returns how many were taken.
  template <class F>
  std::size_t drain(F&& f) {
    std::vector<T> batch;
    {
      std::lock_guard lock(mu_);
      batch.reserve(size_);
      for (; size_ > 0; --size_) {
        batch.push_back(std::move(slots_[head_]));
        head_ = (head_ + 1) % slots_.size();
      }
    }
    if (!batch.empty()) not_full_.notify_all();
    for (T& item : batch) f(item);
    return batch.size();
  }

  template <class Rep, class Period>
  void wait_not_empty(std::chrono::duration<Rep, Period> timeout) {
    std::unique_lock lock(mu_);
    not_empty_.wait_for(lock, timeout, [&] { return size_ > 0 || closed_; });
  }

  template <class Rep, class Period>
  void wait_not_full(std::chrono::duration<Rep, Period> timeout) {
    std::unique_lock lock(mu_);
    not_full_.wait_for(lock, timeout, [&] { return size_ < slots_.size() || closed_; });
  }

  /// Wakes all waiters; later pushes fail.
  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return size_;
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::vector<T> slots_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
  bool closed_ = false;
};

}  // namespace pbt
