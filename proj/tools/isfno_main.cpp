#include "commands.hpp"

int main(int argc, char **argv) { return isfno::cli::run(argc, argv); }
