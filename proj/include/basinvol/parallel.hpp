#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <optional>
#include <thread>
#include <type_traits>
#include <vector>

namespace basinvol {

inline std::size_t resolve_workers(std::size_t requested) {
    if (requested > 0) return requested;
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Evaluates fn(0..count-1) on a bounded pool and returns the results in index
// order. If any task throws, the exception of the lowest failing index is
// rethrown after all workers finish.
template <class Fn>
auto parallel_map(std::size_t count, std::size_t workers, Fn&& fn) -> std::vector<std::invoke_result_t<Fn&, std::size_t>> {
    using R = std::invoke_result_t<Fn&, std::size_t>;
    std::vector<std::optional<R>> slots(count);
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
            try {
                slots[i].emplace(fn(i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t pool = std::min(resolve_workers(workers), std::max<std::size_t>(count, 1));
    if (pool <= 1) {
        worker();
    } else {
        std::vector<std::jthread> threads;
        threads.reserve(pool);
        for (std::size_t t = 0; t < pool; ++t) threads.emplace_back(worker);
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    std::vector<R> out;
    out.reserve(count);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

}  // namespace basinvol
