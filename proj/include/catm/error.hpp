#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace catm {

// Base error carrying the name of the module that raised it.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& message)
        : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

    const std::string& module() const { return module_; }

private:
    std::string module_;
};

// Invalid input or configuration. The path names the offending config entry.
class ConfigError : public Error {
public:
    ConfigError(const std::string& module, const std::string& path, const std::string& message)
        : Error(module, (path.empty() ? std::string() : path + ": ") + message), path_(path) {}

    const std::string& path() const { return path_; }

private:
    std::string path_;
};

// Iterative solver failure. Carries the residual history up to the failure.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& module, const std::string& message,
                     std::vector<double> history)
        : Error(module, message), history_(std::move(history)) {}

    const std::vector<double>& history() const { return history_; }

private:
    std::vector<double> history_;
};

}  // namespace catm
