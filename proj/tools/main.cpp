#include "vru/cli.hpp"

int main(int argc, char** argv) { return vru::run_cli(argc, argv); }
