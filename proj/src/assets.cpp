#include "lsdb/assets.hpp"

#include <fstream>
#include <sstream>

#include "lsdb/error.hpp"

namespace lsdb::assets {

std::string_view get(std::string_view name) {
  if (auto data = find(name)) return *data;
  throw Error(ErrorCode::InvalidArgument, "no built-in asset named " + std::string(name));
}

std::string load_or_builtin(const std::string& path, std::string_view name) {
  if (path.empty()) return std::string(get(name));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read asset file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

} // namespace lsdb::assets
