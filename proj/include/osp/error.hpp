#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace osp {

// Contract violation inside a named module. The CLI maps the module tag to a
// distinct process exit code.
class ContractError : public std::runtime_error {
public:
    ContractError(std::string module, const std::string& what)
        : std::runtime_error(module + ": " + what), module_(std::move(module)) {}

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

[[noreturn]] inline void contract_fail(const std::string& module, const std::string& msg) {
    throw ContractError(module, msg);
}

inline void require(bool ok, const std::string& module, const std::string& msg) {
    if (!ok) contract_fail(module, msg);
}

}  // namespace osp
