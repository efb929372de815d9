#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>

namespace funfoc {

/// Malformed or inconsistent input (maps to CLI exit code 1).
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}

  InputError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what) {}
};

/// A statistic that cannot be computed on the given data
/// (e.g. zero rank variance, singular design).
class StatsError : public std::runtime_error {
 public:
  explicit StatsError(const std::string& what) : std::runtime_error(what) {}
};

/// Internal invariant violation (maps to CLI exit code 2).
class InvariantError : public std::logic_error {
 public:
  explicit InvariantError(const std::string& what) : std::logic_error(what) {}
};

enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitInternal = 2 };

/// Runs body and maps what it throws to an exit code, reporting on err.
template <typename Body>
int run_guarded(Body&& body, std::ostream& err) {
  try {
    body();
    return kExitOk;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const StatsError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace funfoc
