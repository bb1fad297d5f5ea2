#include "pnmt/cli.hpp"

int main(int argc, char** argv) { return pnmt::cli_main(argc, argv); }
