// SPDX-License-Identifier: MIT
//
// Tiny assertion harness shared by the test executables. A failed check
// prints [FAIL] with location and message and exits nonzero immediately.

#pragma once

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <string>

namespace testing_detail {
inline int& check_count() {
    static int n = 0;
    return n;
}
}  // namespace testing_detail

#define REQUIRE(cond, msg)                                                              \
    do {                                                                                \
        if (!(cond)) {                                                                  \
            std::cerr << "[FAIL] " << __FILE__ << ":" << __LINE__ << "  " << (msg)      \
                      << "  (" << #cond << ")" << std::endl;                            \
            std::exit(1);                                                               \
        }                                                                               \
        ++testing_detail::check_count();                                                \
    } while (0)

#define REQUIRE_NEAR(a, b, tol, msg)                                                    \
    do {                                                                                \
        const double _va = (a), _vb = (b), _tol = (tol);                                \
        if (!(std::abs(_va - _vb) <= _tol)) {                                           \
            std::cerr << "[FAIL] " << __FILE__ << ":" << __LINE__ << "  " << (msg)      \
                      << "  |" << _va << " - " << _vb << "| > " << _tol << std::endl;   \
            std::exit(1);                                                               \
        }                                                                               \
        ++testing_detail::check_count();                                                \
    } while (0)

#define REQUIRE_THROWS(expr, msg)                                                       \
    do {                                                                                \
        bool _threw = false;                                                            \
        try {                                                                           \
            (void)(expr);                                                               \
        } catch (const std::exception&) {                                               \
            _threw = true;                                                              \
        }                                                                               \
        if (!_threw) {                                                                  \
            std::cerr << "[FAIL] " << __FILE__ << ":" << __LINE__ << "  " << (msg)      \
                      << "  (expected exception from " << #expr << ")" << std::endl;    \
            std::exit(1);                                                               \
        }                                                                               \
        ++testing_detail::check_count();                                                \
    } while (0)

#define RUN(fn)                                                 \
    do {                                                        \
        fn();                                                   \
        std::cout << "[PASS] " << #fn << std::endl;             \
    } while (0)

inline int finish(const char* suite) {
    std::cout << "[OK] " << suite << ": " << testing_detail::check_count() << " checks"
              << std::endl;
    return 0;
}
