#pragma once

#include <stdexcept>
#include <string>

namespace mixtraffic {

/// Malformed or inconsistent configuration / input document.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mixtraffic
