#include "impactrank/commands.hpp"

int main(int argc, char** argv) { return impactrank::run_cli(argc, argv); }
