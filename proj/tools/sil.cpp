#include "sil/cli.hpp"

int main(int argc, char** argv) { return sil::cli::run(argc, argv); }
