#include <atomic>
#include <csignal>

#include "footfall/cli.hpp"

namespace {
std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }
}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  return footfall::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr, &g_stop);
}
