#pragma once

#include <chrono>
#include <cstdint>

namespace strombench {

/// Wall-anchored monotonic clock. The wall offset is captured once at process
/// start and advanced by steady_clock, so every timestamp issued by this
/// process is comparable and never goes backwards even if the system clock
/// steps.
class Clock {
public:
    static std::int64_t now_ms() { return now_us() / 1000; }

    static std::int64_t now_us() {
        const Anchor& a = anchor();
        auto elapsed = std::chrono::steady_clock::now() - a.steady;
        return a.wall_us +
               std::chrono::duration_cast<std::chrono::microseconds>(elapsed).count();
    }

private:
    struct Anchor {
        std::int64_t wall_us;
        std::chrono::steady_clock::time_point steady;
    };

    static const Anchor& anchor() {
        static const Anchor a = [] {
            Anchor r;
            r.wall_us = std::chrono::duration_cast<std::chrono::microseconds>(
                            std::chrono::system_clock::now().time_since_epoch())
                            .count();
            r.steady = std::chrono::steady_clock::now();
            return r;
        }();
        return a;
    }
};

} // namespace strombench
