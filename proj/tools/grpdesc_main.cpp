#include <grpdesc/cli.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    return grpdesc::cli::main_entry(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
