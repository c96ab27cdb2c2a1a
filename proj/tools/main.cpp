#include "cosdd/cli.hpp"

int main(int argc, char** argv) { return cosdd::run_cli(argc, argv); }
