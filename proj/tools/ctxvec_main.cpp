#include "ctxvec/cli.hpp"

int main(int argc, char** argv) { return ctxvec::run_cli(argc, argv); }
