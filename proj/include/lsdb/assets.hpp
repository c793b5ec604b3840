#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace lsdb::assets {

/// Built-in copy of a file from the repository's assets/ directory.
std::optional<std::string_view> find(std::string_view name);

/// Same as find() but throws InvalidArgument for an unknown name.
std::string_view get(std::string_view name);

/// Loads `path` when non-empty, otherwise the built-in asset `name`.
std::string load_or_builtin(const std::string& path, std::string_view name);

} // namespace lsdb::assets
