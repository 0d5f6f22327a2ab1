#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace mw {

// Input/config problems map to CLI exit code 2, runtime failures to 3.
class Error : public std::runtime_error {
public:
    enum class Kind { input, runtime };

    Error(Kind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

namespace detail {
inline void build_msg(std::ostringstream&) {}
template <typename T, typename... Rest>
void build_msg(std::ostringstream& os, const T& v, const Rest&... rest) {
    os << v;
    build_msg(os, rest...);
}
}  // namespace detail

template <typename... Args>
[[noreturn]] void input_error(const Args&... args) {
    std::ostringstream os;
    detail::build_msg(os, args...);
    throw Error(Error::Kind::input, os.str());
}

template <typename... Args>
[[noreturn]] void runtime_error(const Args&... args) {
    std::ostringstream os;
    detail::build_msg(os, args...);
    throw Error(Error::Kind::runtime, os.str());
}

}  // namespace mw
