// SPDX-License-Identifier: Apache-2.0
#include <synctva/cli.hpp>

int main(int argc, char **argv) { return synctva::run_cli(argc, argv); }
