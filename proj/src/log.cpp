#include "bfv/log.hpp"

#include <iostream>
#include <mutex>

namespace bfv {

namespace {
std::mutex sink_mutex;
WarningSink& sink_ref()
{
    static WarningSink sink;
    return sink;
}
} // namespace

void set_warning_sink(WarningSink sink)
{
    std::lock_guard lock(sink_mutex);
    sink_ref() = std::move(sink);
}

void warn(const std::string& message)
{
    std::lock_guard lock(sink_mutex);
    if (sink_ref())
        sink_ref()(message);
    else
        std::cerr << "warning: " << message << '\n';
}

} // namespace bfv
