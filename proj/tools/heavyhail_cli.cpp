#include "commands.hpp"

int main(int argc, char** argv) { return heavyhail::cli::run(argc, argv); }
