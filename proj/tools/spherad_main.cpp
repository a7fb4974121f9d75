#include "spherad/cli.hpp"

int main(int argc, char** argv) { return spherad::run_command(argc, argv); }
