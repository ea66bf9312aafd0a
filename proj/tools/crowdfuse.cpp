#include "crowdfuse/cli.hpp"

int main(int argc, char** argv) { return crowdfuse::cli::run(argc, argv); }
