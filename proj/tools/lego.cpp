// SPDX-License-Identifier: Apache-2.0
#include "lego/cli.hpp"

int main(int argc, char** argv) { return lego::cli::run(argc, argv); }
