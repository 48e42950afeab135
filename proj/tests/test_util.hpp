#pragma once

#include <string>

#include "locrs/rules.hpp"

namespace testutil {

inline std::string spec_path(const std::string& name) { return std::string(LOCRS_SPEC_DIR) + "/" + name; }

inline locrs::EquationSpec load(const std::string& name) { return locrs::load_spec_file(spec_path(name)); }

} // namespace testutil
