#pragma once

#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>

namespace digirl::farm {

/// Worker-to-host transport. Workers send; the host is the only receiver.
template <typename T>
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(T item) = 0;
  /// Blocks until an item arrives; nullopt once closed and drained.
  virtual std::optional<T> receive() = 0;
  virtual void close() = 0;
};

/// Unbounded in-process queue.
template <typename T>
class InProcessChannel final : public Transport<T> {
 public:
  void send(T item) override {
    {
      std::lock_guard lock(mu_);
      items_.push_back(std::move(item));
    }
    cv_.notify_one();
  }

  std::optional<T> receive() override {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    return item;
  }

  void close() override {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<T> items_;
  bool closed_ = false;
};

}  // namespace digirl::farm
