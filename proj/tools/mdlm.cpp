#include "mdlm/cli.hpp"

int main(int argc, char** argv) { return mdlm::cli::run(argc, argv); }
