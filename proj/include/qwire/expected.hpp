#ifndef QWIRE_EXPECTED_HPP
#define QWIRE_EXPECTED_HPP

#include <cassert>
#include <utility>
#include <variant>

namespace qw {

// Minimal value-or-error carrier (std::expected is C++23).
template <class T, class E>
class Expected {
public:
    Expected(T value) : v_(std::in_place_index<0>, std::move(value)) {}
    Expected(E error) : v_(std::in_place_index<1>, std::move(error)) {}

    bool ok() const { return v_.index() == 0; }
    explicit operator bool() const { return ok(); }

    const T& value() const { assert(ok()); return std::get<0>(v_); }
    T& value() { assert(ok()); return std::get<0>(v_); }
    const E& error() const { assert(!ok()); return std::get<1>(v_); }

private:
    std::variant<T, E> v_;
};

} // namespace qw

#endif
