#pragma once

#include <iostream>
#include <string>
#include <vector>

#include "chaintensor/common.hpp"

namespace testing {

// Collects warnings for the lifetime of the object.
class WarningCapture {
 public:
  WarningCapture() {
    chaintensor::set_warning_sink([this](const std::string& m) { messages.push_back(m); });
  }
  ~WarningCapture() {
    chaintensor::set_warning_sink([](const std::string& m) { std::cerr << "warning: " << m << '\n'; });
  }
  bool contains(const std::string& needle) const {
    for (const auto& m : messages)
      if (m.find(needle) != std::string::npos) return true;
    return false;
  }
  std::vector<std::string> messages;
};

inline chaintensor::CMatrix pauli_x() {
  chaintensor::CMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
inline chaintensor::CMatrix pauli_z() {
  chaintensor::CMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

}  // namespace testing
