#pragma once

#include <stdexcept>
#include <string>

namespace sympo {

// Bad dimensions, inconsistent world geometry, malformed config values.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// API misuse: empty batches, batch size exceeding the dataset, etc.
struct usage_error : std::runtime_error {
  explicit usage_error(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values where the math requires finite ones.
struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

// Data synthesis could not produce a valid sample set.
struct generation_error : std::runtime_error {
  explicit generation_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sympo
