#include "cogspeech/cli.hpp"

int main(int argc, char** argv) { return cogspeech::run_cli(argc, argv); }
