#pragma once

#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace additive {

// Worker count: hardware concurrency capped by ADDITIVE_LAB_THREADS.
inline int worker_count() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("ADDITIVE_LAB_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1 && cap < n) n = cap;
    }
    return n;
}

// Persistent pool running the same range task across fixed contiguous row
// blocks. Each index is processed by exactly one worker with identical
// per-index arithmetic, so results do not depend on the worker count.
class RowPool {
public:
    explicit RowPool(int threads) : threads_(threads < 1 ? 1 : threads) {
        for (int t = 1; t < threads_; ++t)
            workers_.emplace_back([this, t] { worker_loop(t); });
    }

    ~RowPool() {
        {
            std::unique_lock<std::mutex> lock(mutex_);
            stop_ = true;
            ++generation_;
        }
        cv_start_.notify_all();
        for (auto& w : workers_) w.join();
    }

    int threads() const { return threads_; }

    // Runs fn(begin, end) over a static partition of [0, n); blocks until all
    // blocks are done. fn must be safe to call concurrently on disjoint ranges.
    void run(int n, const std::function<void(int, int)>& fn) {
        if (threads_ == 1 || n < 2 * threads_) {
            fn(0, n);
            return;
        }
        {
            std::unique_lock<std::mutex> lock(mutex_);
            task_ = &fn;
            task_n_ = n;
            pending_ = threads_ - 1;
            ++generation_;
        }
        cv_start_.notify_all();
        fn(block_begin(0, n), block_end(0, n));
        std::unique_lock<std::mutex> lock(mutex_);
        cv_done_.wait(lock, [this] { return pending_ == 0; });
        task_ = nullptr;
    }

private:
    int block_begin(int tid, int n) const { return static_cast<int>(static_cast<long>(n) * tid / threads_); }
    int block_end(int tid, int n) const { return static_cast<int>(static_cast<long>(n) * (tid + 1) / threads_); }

    void worker_loop(int tid) {
        std::uint64_t seen = 0;
        for (;;) {
            const std::function<void(int, int)>* task = nullptr;
            int n = 0;
            {
                std::unique_lock<std::mutex> lock(mutex_);
                cv_start_.wait(lock, [&] { return generation_ != seen; });
                seen = generation_;
                if (stop_) return;
                task = task_;
                n = task_n_;
            }
            if (task) (*task)(block_begin(tid, n), block_end(tid, n));
            {
                std::unique_lock<std::mutex> lock(mutex_);
                if (--pending_ == 0) cv_done_.notify_one();
            }
        }
    }

    int threads_;
    std::vector<std::thread> workers_;
    std::mutex mutex_;
    std::condition_variable cv_start_, cv_done_;
    const std::function<void(int, int)>* task_ = nullptr;
    int task_n_ = 0;
    int pending_ = 0;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
};

}  // namespace additive
