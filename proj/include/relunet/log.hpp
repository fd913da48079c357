#pragma once

#include <atomic>
#include <iostream>
#include <string_view>

namespace relunet {

inline std::atomic<bool>& warnings_enabled() {
    static std::atomic<bool> flag{true};
    return flag;
}

inline void log_warning(std::string_view message) {
    if (warnings_enabled().load()) std::cerr << "warning: " << message << '\n';
}

}  // namespace relunet
