#include "sharpefolio/cli.hpp"

int main(int argc, char** argv) { return sharpefolio::run_cli(argc, argv); }
