#include "duetkd/cli.hpp"

int main(int argc, char** argv) {
    return duetkd::run_cli(argc, argv);
}
