#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace gsrec {

namespace detail {
template <typename... Args>
std::string format_message(Args&&... args) {
    std::ostringstream oss;
    (oss << ... << args);
    return oss.str();
}
}  // namespace detail

}  // namespace gsrec

// Argument/precondition violations. Message should name the offending value.
#define GSREC_CHECK_ARG(cond, ...)                                                      \
    do {                                                                                \
        if (!(cond)) {                                                                  \
            throw std::invalid_argument(::gsrec::detail::format_message(__VA_ARGS__));  \
        }                                                                               \
    } while (0)

// Runtime failures (I/O, divergence, parse errors).
#define GSREC_CHECK_RUNTIME(cond, ...)                                                  \
    do {                                                                                \
        if (!(cond)) {                                                                  \
            throw std::runtime_error(::gsrec::detail::format_message(__VA_ARGS__));     \
        }                                                                               \
    } while (0)
