#pragma once

#include <string>
#include <utility>
#include <vector>

namespace cheeger {

const char* version();

/// (module, source hash) pairs computed at configure time.
const std::vector<std::pair<std::string, std::string>>& module_hashes();

} // namespace cheeger
