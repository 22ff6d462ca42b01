#pragma once

#include <stdexcept>
#include <string>

namespace penn {

// Library-wide exception type. Messages are expected to name the offending
// quantity (layer, column, dimension) so callers can report precisely.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

}  // namespace penn
