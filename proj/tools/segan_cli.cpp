// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "segan/cli.hpp"

int main(int argc, char** argv) { return segan::cli::run(argc, argv); }
