#pragma once

#include <ostream>

namespace epigen::app
{

/// Entry point of the epigen command line tool. Returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace epigen::app
