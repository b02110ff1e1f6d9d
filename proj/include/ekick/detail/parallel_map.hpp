#pragma once

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace ekick {

template <class T, class F>
std::vector<T> parallel_map(std::size_t count, std::size_t workers, F&& f)
{
    std::vector<T> out(count);
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i)
            out[i] = f(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++)
                out[i] = f(i);
        });
    for (auto& t : pool)
        t.join();
    return out;
}

} // namespace ekick
