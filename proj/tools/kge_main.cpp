#include "kge/cli.hpp"

int main(int argc, char** argv) { return kge::run(argc, argv); }
