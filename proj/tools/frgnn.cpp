#include "frgnn/cli.hpp"

int main(int argc, char** argv) { return frgnn::run_cli(argc, argv); }
