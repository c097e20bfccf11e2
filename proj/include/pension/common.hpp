#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace pension {

inline constexpr const char* kVersion = "1.0.0";

// Every module error carries a short machine-readable code next to the message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& msg)
        : std::runtime_error(msg), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

inline void require(bool ok, const char* code, const std::string& msg) {
    if (!ok) throw Error(code, msg);
}

// Fixed-order pairwise summation. The split points depend only on n, so the
// result is identical no matter how the summands were produced.
template <class F>
double pairwise_sum(std::size_t lo, std::size_t hi, const F& term) {
    if (hi - lo <= 16) {
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += term(i);
        return s;
    }
    std::size_t mid = lo + (hi - lo) / 2;
    return pairwise_sum(lo, mid, term) + pairwise_sum(mid, hi, term);
}

template <class F>
double pairwise_mean(std::size_t n, const F& term) {
    if (n == 0) return 0.0;
    return pairwise_sum(0, n, term) / static_cast<double>(n);
}

inline double sum(const std::vector<double>& v) {
    return pairwise_sum(0, v.size(), [&](std::size_t i) { return v[i]; });
}

inline double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : sum(v) / static_cast<double>(v.size());
}

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
    static std::atomic<unsigned> n{0};
    return n;
}
}  // namespace detail

// 0 means "use the hardware count".
inline void set_threads(unsigned n) { detail::thread_setting() = n; }

inline unsigned thread_count() {
    unsigned n = detail::thread_setting();
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

// Static partition of [0, n). Callers write only to slot i, so output does not
// depend on the number of threads.
template <class F>
void parallel_for(std::size_t n, const F& body, unsigned threads = 0) {
    if (threads == 0) threads = thread_count();
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(threads);
    std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
        pool.emplace_back([&, lo, hi, t] {
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                errs[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

// Calendar months are stored as year*12 + (month-1).
inline int make_month(int year, int month) { return year * 12 + (month - 1); }
inline int month_year(int m) { return m / 12; }
inline int month_of_year(int m) { return m % 12 + 1; }

inline std::string format_month(int m) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d", month_year(m), month_of_year(m));
    return buf;
}

inline int parse_month(const std::string& s) {
    int y = 0, mo = 0;
    if (std::sscanf(s.c_str(), "%d-%d", &y, &mo) != 2 || mo < 1 || mo > 12)
        throw Error("parse", "bad calendar month '" + s + "', expected YYYY-MM");
    return make_month(y, mo);
}

}  // namespace pension
