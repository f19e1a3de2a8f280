#include <qsdlab/cli.hpp>

int main(int argc, char** argv) { return qsdlab::run_command(argc, argv); }
