#include <vector>

#include "tailmix/commands.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return tailmix::run_cli(std::move(args));
}
