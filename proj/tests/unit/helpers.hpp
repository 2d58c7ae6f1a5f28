#pragma once

#include <optional>

#include "djcm/error.hpp"

template <class F>
std::optional<djcm::ErrorKind> error_kind(F&& f) {
    try {
        f();
    } catch (const djcm::Error& e) {
        return e.kind();
    }
    return std::nullopt;
}
