#include "cmls/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace cmls {

namespace {

std::size_t initial_threads()
{
    const char* env = std::getenv("CMLS_THREADS");
    if (!env || !*env) return 1;
    try {
        const long v = std::stol(env);
        return v < 1 ? 1 : std::size_t(v);
    }
    catch (const std::exception&) {
        return 1;
    }
}

std::atomic<std::size_t>& threads()
{
    static std::atomic<std::size_t> n{initial_threads()};
    return n;
}

} // namespace

std::size_t thread_count() { return threads().load(); }

void set_thread_count(std::size_t n) { threads().store(n < 1 ? 1 : n); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn)
{
    const std::size_t workers = std::min(thread_count(), n);
    if (workers <= 1) {
        if (n > 0) fn(0, n);
        return;
    }
    std::exception_ptr error;
    std::mutex mu;
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t b = w * chunk, e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&, b, e] {
            try {
                fn(b, e);
            }
            catch (...) {
                std::lock_guard lock(mu);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace cmls
