#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "cfeg/common.hpp"

namespace cfeg {

/// Runs body(i) for i in [0, n) on at most `parallelism` threads. Callers
/// write results into slot i, which keeps output order equal to input order
/// regardless of completion order. The first exception is rethrown after all
/// workers stop.
inline void bounded_for(std::size_t n, std::size_t parallelism, const std::function<void(std::size_t)>& body) {
    if (n == 0) return;
    parallelism = std::clamp<std::size_t>(parallelism, 1, n);
    if (parallelism == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};
    std::mutex error_mu;
    {
        std::vector<std::jthread> workers;
        workers.reserve(parallelism);
        for (std::size_t w = 0; w < parallelism; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i; !failed && (i = next.fetch_add(1)) < n;) {
                    try {
                        body(i);
                    } catch (...) {
                        std::lock_guard lock(error_mu);
                        if (!first_error) first_error = std::current_exception();
                        failed = true;
                    }
                }
            });
        }
    }
    if (first_error) std::rethrow_exception(first_error);
}

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{200};
    double multiplier = 2.0;
};

/// Calls fn until it succeeds, a non-retryable BackendError is thrown, or the
/// attempts are used up. `attempts_used` receives the number of calls made.
template <typename Fn>
auto with_retry(const RetryPolicy& policy, Fn&& fn, int* attempts_used = nullptr) -> decltype(fn()) {
    auto backoff = policy.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        if (attempts_used) *attempts_used = attempt;
        try {
            return fn();
        } catch (const BackendError& e) {
            if (!e.retryable() || attempt >= policy.attempts) throw;
        }
        std::this_thread::sleep_for(backoff);
        backoff = std::chrono::milliseconds(static_cast<long long>(backoff.count() * policy.multiplier));
    }
}

}  // namespace cfeg
