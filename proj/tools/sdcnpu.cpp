#include "sdcnpu/cli/commands.hpp"

#include <atomic>
#include <csignal>
#include <iostream>

namespace
{

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

} // namespace

int main(int argc, char** argv)
{
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::vector<std::string> args(argv + 1, argv + argc);
    return sdcnpu::cli::run(args, std::cout, std::cerr, &g_stop);
}
