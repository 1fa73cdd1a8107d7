#pragma once

// The `seqrec` command line: gen, train, eval, ablate, gradcheck, report.

#include <ostream>
#include <string>
#include <vector>

namespace seqrec {

/// `args` excludes the program name. Returns the process exit status: 0 only when
/// every output was written.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace seqrec
