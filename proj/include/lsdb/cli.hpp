#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lsdb::cli {

/// Exit codes: 0 success, 1 operational failure, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

} // namespace lsdb::cli
