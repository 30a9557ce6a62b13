#pragma once

#include <stdexcept>
#include <string>

namespace pmem {

/// Domain failure that is not a bad argument: "undefined heading", "no path",
/// "behind camera", "revisit poses differ", stale caches, I/O problems.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw std::invalid_argument(message);
}

}  // namespace pmem
