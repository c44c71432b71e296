#include "prefforge/cli.hpp"

int main(int argc, char** argv) { return prefforge::run_command(argc, argv); }
