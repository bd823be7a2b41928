#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace diffdepth {

// Fixed-size worker pool with a blocking parallel_for. Work is split into
// contiguous index ranges; each output index is computed by exactly one
// task with a fixed serial inner loop, so results are bit-identical for any
// worker count (including 1).
class ThreadPool {
public:
    static ThreadPool& instance() {
        static ThreadPool pool(default_threads());
        return pool;
    }

    static int default_threads() {
        if (const char* env = std::getenv("DIFFDEPTH_THREADS")) {
            int n = std::atoi(env);
            if (n >= 1) return n;
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : (int)hw;
    }

    explicit ThreadPool(int threads) : stop_(false), active_(0) {
        if (threads < 1) threads = 1;
        for (int i = 0; i + 1 < threads; ++i)
            workers_.emplace_back([this] { worker_loop(); });
    }

    ~ThreadPool() {
        {
            std::lock_guard<std::mutex> lk(m_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : workers_) t.join();
    }

    int size() const { return (int)workers_.size() + 1; }

    // fn(begin, end) over [0, n), chunked across workers; the calling thread
    // participates. Blocks until all chunks finish.
    void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
        if (n <= 0) return;
        int nt = size();
        if (nt == 1 || n == 1) {
            fn(0, n);
            return;
        }
        int chunks = (int)std::min<int64_t>(n, nt);
        int64_t per = (n + chunks - 1) / chunks;
        std::atomic<int> remaining((int)chunks);
        std::mutex done_m;
        std::condition_variable done_cv;
        {
            std::lock_guard<std::mutex> lk(m_);
            for (int c = 1; c < chunks; ++c) {
                int64_t b = c * per, e = std::min<int64_t>(n, (c + 1) * per);
                tasks_.emplace_back([&, b, e] {
                    fn(b, e);
                    if (remaining.fetch_sub(1) == 1) {
                        std::lock_guard<std::mutex> dlk(done_m);
                        done_cv.notify_one();
                    }
                });
            }
        }
        cv_.notify_all();
        fn(0, std::min<int64_t>(n, per));
        if (remaining.fetch_sub(1) != 1) {
            std::unique_lock<std::mutex> dlk(done_m);
            done_cv.wait(dlk, [&] { return remaining.load() == 0; });
        }
    }

private:
    void worker_loop() {
        for (;;) {
            std::function<void()> task;
            {
                std::unique_lock<std::mutex> lk(m_);
                cv_.wait(lk, [this] { return stop_ || !tasks_.empty(); });
                if (stop_ && tasks_.empty()) return;
                task = std::move(tasks_.back());
                tasks_.pop_back();
            }
            task();
        }
    }

    std::vector<std::thread> workers_;
    std::vector<std::function<void()>> tasks_;
    std::mutex m_;
    std::condition_variable cv_;
    bool stop_;
    std::atomic<int> active_;
};

inline void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    ThreadPool::instance().parallel_for(n, fn);
}

}  // namespace diffdepth
