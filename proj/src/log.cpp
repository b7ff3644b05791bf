#include "rnv/log.hpp"

#include <iostream>
#include <mutex>
#include <vector>

namespace rnv {
namespace {

std::mutex g_sink_mutex;

WarningSink& sink_slot() {
    static WarningSink sink = [](const std::string& m) { std::cerr << "warning: " << m << '\n'; };
    return sink;
}

}  // namespace

void warn(const std::string& message) {
    std::lock_guard lock(g_sink_mutex);
    if (sink_slot()) sink_slot()(message);
}

WarningSink set_warning_sink(WarningSink sink) {
    std::lock_guard lock(g_sink_mutex);
    WarningSink previous = std::move(sink_slot());
    sink_slot() = std::move(sink);
    return previous;
}

ScopedWarningCapture::ScopedWarningCapture() {
    previous_ = set_warning_sink([this](const std::string& m) { messages_.push_back(m); });
}

ScopedWarningCapture::~ScopedWarningCapture() { set_warning_sink(std::move(previous_)); }

bool ScopedWarningCapture::contains(const std::string& needle) const {
    for (const auto& m : messages_) {
        if (m.find(needle) != std::string::npos) return true;
    }
    return false;
}

}  // namespace rnv
