#pragma once

#include <functional>
#include <string>
#include <vector>

namespace rnv {

// Non-fatal diagnostics (clamped k, dropped frames, null fits, ...) go through
// a process-wide sink. The default writes "warning: <msg>" to stderr.
using WarningSink = std::function<void(const std::string&)>;

void warn(const std::string& message);

// Installs a sink and returns the previous one.
WarningSink set_warning_sink(WarningSink sink);

// RAII capture of warnings, mostly for tests.
class ScopedWarningCapture {
public:
    ScopedWarningCapture();
    ~ScopedWarningCapture();
    ScopedWarningCapture(const ScopedWarningCapture&) = delete;
    ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

    const std::vector<std::string>& messages() const { return messages_; }
    bool contains(const std::string& needle) const;

private:
    std::vector<std::string> messages_;
    WarningSink previous_;
};

}  // namespace rnv
