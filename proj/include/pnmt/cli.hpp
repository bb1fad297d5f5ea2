#pragma once

namespace pnmt {

// Subcommand dispatcher behind the pnmt binary. Returns 0 on success, 2 on
// usage errors (unknown flags, bad values), 1 on runtime failures.
int cli_main(int argc, char** argv);

}  // namespace pnmt
