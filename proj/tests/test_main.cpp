#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "bfv/log.hpp"

int main(int argc, char** argv)
{
    // Degenerate inputs exercised on purpose would flood the log.
    bfv::set_warning_sink([](const std::string&) {});
    doctest::Context context(argc, argv);
    return context.run();
}
