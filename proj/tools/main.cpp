#include "rwmcv/cli.hpp"

int main(int argc, char** argv) { return rwmcv::cli_main(argc, argv); }
