#pragma once

#include <functional>
#include <string>

namespace c2f::log {

using Sink = std::function<void(const std::string&)>;

/// Routes warnings; the default sink writes "warning: ..." lines to stderr.
/// Returns the previous sink.
Sink set_warning_sink(Sink sink);

void warn(const std::string& message);

}  // namespace c2f::log
