#include <string>
#include <vector>

#include "tanwb/cli.hpp"

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return tanwb::cli::run_command(args);
}
