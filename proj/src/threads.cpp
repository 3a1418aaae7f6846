#include "posevid/threads.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace posevid {

std::size_t configured_worker_count()
{
    std::size_t n = 0;
    if (const char* env = std::getenv("POSEANYTHING_THREADS")) {
        try {
            n = static_cast<std::size_t>(std::stoul(env));
        } catch (const std::exception&) {
            n = 0;
        }
    }
    if (n == 0) {
        n = std::max(1u, std::thread::hardware_concurrency());
    }
    return n;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn)
{
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!first_error) {
                            first_error = std::current_exception();
                        }
                    }
                }
            });
        }
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

}  // namespace posevid
