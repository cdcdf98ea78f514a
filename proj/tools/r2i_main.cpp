#include "r2i/cli/pipeline.hpp"

int main(int argc, char** argv) { return r2i::cli::main_entry(argc, argv); }
